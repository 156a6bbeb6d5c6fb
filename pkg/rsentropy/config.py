"""
Configuration management: tabulated bandwidth constants and experiment spec files.
"""

import configparser
import json
import os
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Tuple

from .errors import ConfigurationError

DEFAULT_TABLES_PATH = os.path.join(os.path.dirname(__file__), 'data', 'bandwidth_tables.json')
DEFAULT_REFERENCE_PATH = os.path.join(os.path.dirname(__file__), 'data', 'reference_tables.json')

DB_PATH_ENV = "RSENTROPY_DB_PATH"
N_JOBS_ENV = "RSENTROPY_N_JOBS"


def default_db_path() -> str:
    return os.environ.get(DB_PATH_ENV, os.path.join(os.getcwd(), 'rsentropy_results.db'))


def default_n_jobs() -> int:
    try:
        return int(os.environ.get(N_JOBS_ENV, "1"))
    except ValueError:
        raise ConfigurationError(f"{N_JOBS_ENV} must be an integer")


@dataclass
class EntropyD1:
    """Rule constants d1 for the entropy estimator, one per correlation."""
    r: int
    k: int
    p: int
    values: List[float]


@dataclass
class MutualInformationD1:
    """Rule constants d1 for the joint (p=2) bandwidth of the MI estimator."""
    r: int
    k: int
    values: List[float]


@dataclass
class ReConstant:
    """Normalizing constant c of gamma = c n^(-1/(2+0.5p)) used for relative efficiencies."""
    scheme: str
    k: int
    rho: float
    c: float


class BandwidthTables:
    """Lookup of tabulated bandwidth constants, keyed by design and correlation."""

    def __init__(self, config_path: str = None):
        """Initialize the tables.

        Args:
            config_path: Path to JSON tables file (package default if omitted)
        """
        if config_path is None:
            config_path = DEFAULT_TABLES_PATH
        self.config_path = config_path
        self.rhos: List[float] = []
        self.entropy: Dict[Tuple[int, int, int], EntropyD1] = {}
        self.mutual_information: Dict[Tuple[int, int], MutualInformationD1] = {}
        self.re_constants: Dict[Tuple[str, int, float], ReConstant] = {}
        self._load_config()

    def _load_config(self):
        """Load tables from JSON file."""
        if not os.path.exists(self.config_path):
            raise ConfigurationError(f"bandwidth tables not found: {self.config_path}")
        with open(self.config_path, 'r') as f:
            data = json.load(f)
        self.rhos = [float(rho) for rho in data.get('rhos', [])]
        for row in data.get('entropy_d1', []):
            entry = EntropyD1(**row)
            self.entropy[(entry.r, entry.k, entry.p)] = entry
        for row in data.get('mi_d1', []):
            entry = MutualInformationD1(**row)
            self.mutual_information[(entry.r, entry.k)] = entry
        for row in data.get('re_constant', []):
            entry = ReConstant(**row)
            self.re_constants[(entry.scheme, entry.k, round(entry.rho, 6))] = entry

    def save_config(self, path: Optional[str] = None):
        """Save tables to JSON file."""
        data = {
            'rhos': self.rhos,
            'entropy_d1': [asdict(e) for e in self.entropy.values()],
            'mi_d1': [asdict(e) for e in self.mutual_information.values()],
            're_constant': [asdict(e) for e in self.re_constants.values()],
        }
        with open(path or self.config_path, 'w') as f:
            json.dump(data, f, indent=2)

    def _rho_index(self, rho: float) -> int:
        for index, value in enumerate(self.rhos):
            if abs(value - rho) < 1e-9:
                return index
        raise ConfigurationError(f"no tabulated constant for rho={rho} (tabulated: {self.rhos})")

    def entropy_d1(self, r: int, k: int, p: int, rho: float) -> float:
        """d1 for the entropy estimator."""
        entry = self.entropy.get((r, k, p))
        if entry is None:
            raise ConfigurationError(f"no entropy d1 for r={r}, k={k}, p={p}")
        return float(entry.values[self._rho_index(rho)])

    def mi_d1(self, r: int, k: int, rho: float) -> float:
        """d1 for the joint bandwidth of the mutual information estimator."""
        entry = self.mutual_information.get((r, k))
        if entry is None:
            raise ConfigurationError(f"no mutual information d1 for r={r}, k={k}")
        return float(entry.values[self._rho_index(rho)])

    def re_constant(self, scheme: str, k: int, rho: float) -> float:
        """c for a scheme (srs, rss, drss); SRS ignores k."""
        key = (scheme, 1 if scheme == "srs" else k, round(rho, 6))
        entry = self.re_constants.get(key)
        if entry is None:
            raise ConfigurationError(f"no relative-efficiency constant for scheme={scheme}, k={k}, rho={rho}")
        return float(entry.c)

    def list_entropy_cells(self) -> list:
        """Get list of all (r, k, p) cells with entropy constants."""
        return sorted(self.entropy.keys())


def load_reference_tables(path: str = None) -> Dict[str, Any]:
    """Reference values of the reproduced tables."""
    with open(path or DEFAULT_REFERENCE_PATH, 'r') as f:
        return json.load(f)


def _coerce(value: str) -> Any:
    """Parse a key = value right-hand side: JSON when possible, raw string otherwise."""
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value.strip()


def read_spec_file(path: str) -> Dict[str, Any]:
    """Read an experiment spec file into a nested dict.

    JSON files are read as-is. Anything else is read as ``key = value`` lines
    grouped in ``[section]`` blocks; values are parsed as JSON when possible.
    Keys of the ``[experiment]`` section are lifted to the top level.
    """
    if not os.path.exists(path):
        raise ConfigurationError(f"spec file not found: {path}")
    with open(path, 'r') as f:
        text = f.read()
    if path.endswith('.json') or text.lstrip().startswith('{'):
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"malformed JSON spec {path}: {e}") from e

    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text if text.lstrip().startswith('[') else "[experiment]\n" + text)
    except configparser.Error as e:
        raise ConfigurationError(f"malformed spec {path}: {e}") from e
    data: Dict[str, Any] = {}
    for section in parser.sections():
        values = {key: _coerce(value) for key, value in parser.items(section)}
        if section == 'experiment':
            data.update(values)
        else:
            data[section] = values
    return data


def load_experiment_spec(path: str):
    """Load an ExperimentSpec from a JSON or key = value spec file."""
    from .simlab import ExperimentSpec

    return ExperimentSpec.from_dict(read_spec_file(path))
