"""
Configuration Module

This module provides functionality to handle configuration settings for the
Ginzburg-Landau LOD experiments: logging setup, command-line parsing, sweep
configuration documents and their validation.
"""
import argparse
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Sequence

from ..json_utils.loader import load_json_config
from .errors import ConfigError

logger = logging.getLogger(__name__)

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
SWEEP_COMMANDS = ("convergence", "decay", "spectrum", "best-approx")
SPACE_ALIASES = {"fem": "fine_fem", "fine_fem": "fine_fem", "coarse_fem": "coarse_fem", "lod": "lod"}
HASH_EXCLUDED_KEYS = ("out_dir", "max_workers", "log_level", "cache_dir", "config_file")

PRESETS: Dict[str, Dict[str, Any]] = {
    "convergence": {"fine_k": 7, "ells": [8], "coarse_ks": [2, 3, 4], "kappas": [8.0], "betas": [0.0, 1.0]},
    "vortex": {"fine_k": 7, "ells": [4], "betas": [0.0], "coarse_ks": [2, 3, 4, 5]},
}


def setup_logging(log_level: str = "INFO") -> None:
    """
    Set up logging configuration.

    Args:
        log_level (str): Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
    """
    numeric_level = getattr(logging, log_level.upper(), None)
    if not isinstance(numeric_level, int):
        raise ValueError(f"Invalid log level: {log_level}")

    logging.basicConfig(
        level=numeric_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )


@dataclass
class ExperimentConfig:
    """
    Parameter grid of a sweep.

    Attributes:
        kappas (List[float]): Ginzburg-Landau parameters
        betas (List[float]): Corrector stabilizations
        ells (List[int]): Patch layers
        coarse_ks (List[int]): Coarse level exponents
        fine_k (int): Fine level exponent shared by all runs
        seeds (List[int]): Seeds of the initial guesses
        delta (float): Energy-difference tolerance of the descent
        out_dir (str): Directory receiving CSV and field files
        drop_coarsest (bool): Ignore the coarsest h in rate fits
        include_kappa32 (bool): Keep kappa = 32 in the coercivity trend
        potential (str): Magnetic potential name
        max_iters (int): Descent iteration cap
        max_workers (Optional[int]): Thread pool size
        warm_start (bool): Start coarse and LOD runs from the projected reference
        cache_dir (Optional[str]): Directory of the LOD space cache, disabled when None
        num_eigs (int): Eigenvalues per pencil in spectrum sweeps
    """

    kappas: List[float] = field(default_factory=lambda: [8.0])
    betas: List[float] = field(default_factory=lambda: [0.0])
    ells: List[int] = field(default_factory=lambda: [4])
    coarse_ks: List[int] = field(default_factory=lambda: [3])
    fine_k: int = 7
    seeds: List[int] = field(default_factory=lambda: [0])
    delta: float = 1e-10
    out_dir: str = "results"
    drop_coarsest: bool = False
    include_kappa32: bool = False
    potential: str = "trig"
    max_iters: int = 200000
    max_workers: Optional[int] = None
    warm_start: bool = True
    cache_dir: Optional[str] = None
    num_eigs: int = 6

    @classmethod
    def from_dict(cls, mapping: Dict[str, Any]) -> "ExperimentConfig":
        """
        Build a config from a flat mapping; keys that are not fields are rejected.

        Raises:
            ConfigError: On unknown keys or values of the wrong shape
        """
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {unknown}")
        values = {key: value for key, value in mapping.items() if value is not None}
        try:
            for key in ("kappas", "betas"):
                if key in values:
                    values[key] = [float(x) for x in values[key]]
            if "delta" in values:
                values["delta"] = float(values["delta"])
            for key in ("ells", "coarse_ks", "seeds"):
                if key in values:
                    values[key] = [int(x) for x in values[key]]
            for key in ("fine_k", "max_iters", "num_eigs"):
                if key in values:
                    values[key] = int(values[key])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Malformed configuration value: {str(e)}") from e
        return cls(**values)

    def validate(self):
        """
        Check the invariants of the parameter grid.

        Raises:
            ConfigError: If the grid is empty or a value is out of range
        """
        for name in ("kappas", "betas", "ells", "coarse_ks", "seeds"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        if any(kappa <= 0 for kappa in self.kappas):
            raise ConfigError(f"All kappa must be positive, got {self.kappas}")
        if any(beta < 0 for beta in self.betas):
            raise ConfigError(f"All beta must be non-negative, got {self.betas}")
        if any(ell < 1 for ell in self.ells):
            raise ConfigError(f"All ell must be at least 1, got {self.ells}")
        if any(k < 0 for k in self.coarse_ks):
            raise ConfigError(f"Coarse levels must be non-negative, got {self.coarse_ks}")
        if self.fine_k <= max(self.coarse_ks):
            raise ConfigError(f"fine_k={self.fine_k} must exceed every coarse level {self.coarse_ks}")
        if self.delta <= 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.num_eigs < 2:
            raise ConfigError(f"num_eigs must be at least 2, got {self.num_eigs}")
        if self.max_workers is not None and self.max_workers < 1:
            raise ConfigError(f"max_workers must be positive, got {self.max_workers}")

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


def config_hash(config: Dict[str, Any]) -> str:
    """
    SHA-256 of the canonical JSON of a config, ignoring output locations and
    scheduling settings.

    Args:
        config (Dict[str, Any]): Flat configuration mapping

    Returns:
        str: Hex digest
    """
    canonical = {key: value for key, value in config.items() if key not in HASH_EXCLUDED_KEYS}
    payload = json.dumps(canonical, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--log-level",
        type=str,
        choices=LOG_LEVELS,
        default=argparse.SUPPRESS,
        help="Logging level (default: INFO)"
    )


def _add_sweep_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=str, dest="config_file", help="JSON document with sweep settings")
    parser.add_argument("--preset", type=str, choices=sorted(PRESETS), help="Named parameter preset")
    parser.add_argument("--kappas", type=float, nargs="*", help="Ginzburg-Landau parameters")
    parser.add_argument("--betas", type=float, nargs="*", help="Corrector stabilizations")
    parser.add_argument("--ells", type=int, nargs="*", help="Patch layers")
    parser.add_argument("--coarse-ks", type=int, nargs="*", help="Coarse level exponents")
    parser.add_argument("--fine-k", type=int, help="Fine level exponent (default: 7)")
    parser.add_argument("--seeds", type=int, nargs="*", help="Initial-guess seeds")
    parser.add_argument("--delta", type=float, help="Energy-difference tolerance (default: 1e-10)")
    parser.add_argument("--max-iters", type=int, help="Descent iteration cap")
    parser.add_argument("--potential", type=str, choices=["trig", "zero"], help="Magnetic potential")
    parser.add_argument("--out-dir", type=str, help="Output directory (default: results)")
    parser.add_argument("--cache-dir", type=str, help="Directory for cached LOD spaces")
    parser.add_argument("--max-workers", type=int, help="Thread pool size")
    parser.add_argument("--num-eigs", type=int, help="Eigenvalues per pencil (default: 6)")
    parser.add_argument(
        "--drop-coarsest", action="store_true", default=None, help="Ignore the coarsest mesh in rate fits"
    )
    parser.add_argument(
        "--include-kappa32", action="store_true", default=None, help="Keep kappa=32 in the coercivity trend"
    )
    parser.add_argument(
        "--no-warm-start", action="store_false", dest="warm_start", default=None,
        help="Start coarse and LOD runs from seeded random guesses"
    )


def build_parser() -> argparse.ArgumentParser:
    """Create the argument parser with one subparser per subcommand."""
    parser = argparse.ArgumentParser(
        description="Ginzburg-Landau energy minimization in P1 finite element and LOD spaces."
    )
    _add_common(parser)
    subparsers = parser.add_subparsers(dest="command", help="Command to execute")
    subparsers.required = True

    minimize_parser = subparsers.add_parser("minimize", help="Compute one discrete minimizer")
    _add_common(minimize_parser)
    minimize_parser.add_argument("--space", type=str, choices=sorted(SPACE_ALIASES), default="fem",
                                 help="Active space (default: fem, the fine P1 space)")
    minimize_parser.add_argument("--kappa", type=float, required=True, help="Ginzburg-Landau parameter")
    minimize_parser.add_argument("--beta", type=float, default=0.0, help="Corrector stabilization (default: 0)")
    minimize_parser.add_argument("--ell", type=int, default=4, help="Patch layers (default: 4)")
    minimize_parser.add_argument("--coarse-k", type=int, default=3, help="Coarse level exponent (default: 3)")
    minimize_parser.add_argument("--fine-k", type=int, default=7, help="Fine level exponent (default: 7)")
    minimize_parser.add_argument("--seed", type=int, default=0, help="Initial-guess seed (default: 0)")
    minimize_parser.add_argument("--delta", type=float, default=1e-10, help="Energy-difference tolerance")
    minimize_parser.add_argument("--max-iters", type=int, default=200000, help="Descent iteration cap")
    minimize_parser.add_argument("--potential", type=str, choices=["trig", "zero"], default="trig")
    minimize_parser.add_argument("--max-workers", type=int, default=None, help="Thread pool size")
    minimize_parser.add_argument("--out", type=str, required=True, help="Output field file")

    for name, help_text in (
        ("convergence", "H1_kappa errors of coarse FEM and LOD minimizers against a fine reference"),
        ("decay", "Localization error of LOD minimizers in the number of patch layers"),
        ("spectrum", "Smallest Hessian eigenvalues at fine minimizers and the coercivity trend"),
        ("best-approx", "Best-approximation errors of LOD spaces for the fine reference"),
    ):
        sweep_parser = subparsers.add_parser(name, help=help_text)
        _add_common(sweep_parser)
        _add_sweep_arguments(sweep_parser)

    export_parser = subparsers.add_parser("export-field", help="Sample |u| of a field file on a uniform grid")
    _add_common(export_parser)
    export_parser.add_argument("--input", type=str, required=True, help="Field file to sample")
    export_parser.add_argument("--output", type=str, required=True, help="Output CSV with columns x,y,abs_u")
    export_parser.add_argument("--grid-n", type=int, default=256, help="Grid points per direction (default: 256)")
    export_parser.add_argument("--threshold", type=float, default=0.3,
                               help="Modulus bound of counted vortex cores (default: 0.3)")

    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> Dict[str, Any]:
    """
    Parse command-line arguments.

    For sweep commands the result merges, in increasing priority, the
    ExperimentConfig defaults, the preset, the JSON document and the flags.

    Args:
        argv (Sequence[str], optional): Arguments without the program name; sys.argv otherwise

    Returns:
        Dict[str, Any]: Flat configuration dictionary
    """
    args = build_parser().parse_args(argv)
    values = vars(args)
    command = args.command
    config: Dict[str, Any] = {"command": command, "log_level": values.get("log_level", "INFO")}

    if command == "minimize":
        config.update({
            "space": SPACE_ALIASES[args.space],
            "kappa": args.kappa,
            "beta": args.beta,
            "ell": args.ell,
            "coarse_k": args.coarse_k,
            "fine_k": args.fine_k,
            "seed": args.seed,
            "delta": args.delta,
            "max_iters": args.max_iters,
            "potential": args.potential,
            "max_workers": args.max_workers,
            "out": os.path.abspath(args.out),
        })

    elif command in SWEEP_COMMANDS:
        merged = ExperimentConfig().as_dict()
        if args.preset:
            merged.update(PRESETS[args.preset])
        if args.config_file:
            document = load_json_config(args.config_file)
            unknown = sorted(set(document) - set(merged))
            if unknown:
                raise ConfigError(f"Unknown keys in {args.config_file}: {unknown}")
            merged.update(document)
        overrides = {
            key: values[key]
            for key in (f.name for f in fields(ExperimentConfig))
            if values.get(key) is not None
        }
        merged.update(overrides)
        if merged.get("out_dir"):
            merged["out_dir"] = os.path.abspath(merged["out_dir"])
        config.update(merged)
        config["preset"] = args.preset

    elif command == "export-field":
        config.update({
            "input": os.path.abspath(args.input),
            "output": os.path.abspath(args.output),
            "grid_n": args.grid_n,
            "threshold": args.threshold,
        })

    return config


def experiment_config(config: Dict[str, Any]) -> ExperimentConfig:
    """The ExperimentConfig part of a flat sweep configuration."""
    names = {f.name for f in fields(ExperimentConfig)}
    return ExperimentConfig.from_dict({key: value for key, value in config.items() if key in names})


def validate_config(config: Dict[str, Any]) -> None:
    """
    Validate configuration settings.

    Args:
        config (Dict[str, Any]): Configuration dictionary

    Raises:
        ConfigError: If configuration is invalid
    """
    command = config.get("command")

    if command == "minimize":
        if config["kappa"] <= 0:
            raise ConfigError(f"kappa must be positive, got {config['kappa']}")
        if config["beta"] < 0:
            raise ConfigError(f"beta must be non-negative, got {config['beta']}")
        if config["ell"] < 1:
            raise ConfigError(f"ell must be at least 1, got {config['ell']}")
        if config["coarse_k"] < 0:
            raise ConfigError(f"coarse_k must be non-negative, got {config['coarse_k']}")
        if config["fine_k"] <= config["coarse_k"]:
            raise ConfigError(f"fine_k={config['fine_k']} must exceed coarse_k={config['coarse_k']}")
        if config["delta"] <= 0:
            raise ConfigError(f"delta must be positive, got {config['delta']}")

        output_dir = os.path.dirname(config["out"])
        if output_dir and not os.path.exists(output_dir):
            os.makedirs(output_dir, exist_ok=True)

    elif command in SWEEP_COMMANDS:
        experiment_config(config).validate()
        if not os.path.exists(config["out_dir"]):
            os.makedirs(config["out_dir"], exist_ok=True)

    elif command == "export-field":
        if not os.path.exists(config["input"]):
            raise ConfigError(f"Field file does not exist: {config['input']}")
        if config["grid_n"] < 2:
            raise ConfigError(f"grid_n must be at least 2, got {config['grid_n']}")

    else:
        raise ConfigError(f"Unknown command: {command}")

    logger.info(f"Configuration validated successfully: {config}")
