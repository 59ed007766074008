"""
Command line: ``pseudogroup --config CONFIG [--out DIR] {verify,tau,classify,orbit} ...``

Every run writes into ``DIR/<config hash>/``: a ``run.json`` header plus the JSON reports and CSV data of the
subcommand. Exit codes: 0 success, 1 input/output, parse or numerical error, 2 hypothesis failure,
3 ambiguous classification.
"""
import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from typing_extensions import Any, Iterable, List, Optional, Sequence

from ._consts import report_schema_version, version
from .classify import ClassificationReport, classify
from .config import Config
from .errors import AmbiguousResolution, CommutatorNotFixed, HypothesisFailure, OutOfDomain, PseudogroupError
from .nilpotency import verify_abelian, verify_metabelian, verify_near_identity_nilpotent
from .pmap import GeneratorSet, Word, eval_word
from .rotation import RotationEstimate, TraceRow, rational_identify, relative_translation_number

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_HYPOTHESIS = 2
EXIT_AMBIGUOUS = 3


def _number(value: Any) -> Any:
    return format(value, ".17g") if isinstance(value, float) else value


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_number(value) for value in row])
    logger.info("wrote %s", path)
    return path


def _json_text(value: Any, level: int = 0) -> str:
    """json.dumps with indent 2, except that finite floats keep 17 significant digits."""
    if isinstance(value, float):
        if not math.isfinite(value):
            return json.dumps(value)
        text = _number(value)
        return text if any(c in text for c in ".e") else text + ".0"
    pad, inner = "  " * level, "  " * (level + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = ",\n".join(f"{inner}{json.dumps(str(key))}: {_json_text(item, level + 1)}" for key, item in value.items())
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        return "[\n" + ",\n".join(inner + _json_text(item, level + 1) for item in value) + "\n" + pad + "]"
    return json.dumps(value)


def write_json(path: Path, payload: Any) -> Path:
    path.write_text(_json_text(payload) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
    return path


class Run:
    """The output directory of one invocation."""

    def __init__(self, config: Config, command: Sequence[str]):
        self.config = config
        self.digest = config.digest()
        self.directory = Path(config.output_dir) / self.digest
        self.directory.mkdir(parents=True, exist_ok=True)
        write_json(self.directory / "run.json", {
            "schema_version": report_schema_version,
            "version": version,
            "config_hash": self.digest,
            "command": list(command),
            "config": config.model_dump(mode="json"),
        })

    def path(self, name: str) -> Path:
        return self.directory / name


def _generator_index(gens: GeneratorSet, token: str) -> int:
    """A generator name, or its 1-based position."""
    if token in gens.names:
        return gens.names.index(token)
    if token.isdigit() and 1 <= int(token) <= len(gens):
        return int(token) - 1
    raise ValueError(f"Unknown generator {token!r}, expected one of {list(gens.names)} or 1..{len(gens)}")


def cmd_verify(config: Config, run: Run) -> int:
    gens = config.to_generator_set()
    tol, samples = config.tolerances.identity, config.iterations.identity_samples
    nilpotent = verify_near_identity_nilpotent(gens, None, tol, samples)
    abelian, abelian_report = verify_abelian(gens, tol, samples)
    metabelian, metabelian_report = verify_metabelian(gens, tol, samples)
    write_json(run.path("verify.json"), {
        "schema_version": report_schema_version,
        "nilpotent": nilpotent.model_dump(mode="json"),
        "abelian": abelian_report.model_dump(mode="json"),
        "metabelian": metabelian_report.model_dump(mode="json"),
    })
    print(nilpotent.summary())
    print(f"abelian: {'yes' if abelian else 'no'}; metabelian: {'yes' if metabelian else 'no'}")
    if not nilpotent.passed:
        if not nilpotent.epsilon_within_bound:
            print(f"epsilon={gens.epsilon:.6g} is not below the bound 1/10^{nilpotent.claimed_order + 1} = {nilpotent.epsilon_bound:.3g}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    return EXIT_OK


def cmd_tau(config: Config, run: Run, i: str, j: str, x0: float) -> int:
    gens = config.to_generator_set()
    first, second = _generator_index(gens, i), _generator_index(gens, j)
    trace: List[TraceRow] = []
    if first == second:
        # tau(f, f, x0) = 1 whatever x0 is
        estimate = RotationEstimate(value=1.0, iterations=0, error_bound=0.0, rational=(1, 1), refined=1.0, normalization="trivial")
    else:
        estimate = relative_translation_number(
            gens, Word.generator(first), Word.generator(second), x0, config.iterations.n_iters,
            tol=config.tolerances.identity, trace=trace,
        )
        estimate = rational_identify(estimate, config.q_max)
    write_csv(run.path("tau_trace.csv"), ("n", "a", "k", "p"), trace)
    write_json(run.path("tau.json"), {
        "schema_version": report_schema_version,
        "f1": gens.names[first],
        "f2": gens.names[second],
        "x0": x0,
        "estimate": estimate.model_dump(mode="json"),
    })
    print(estimate.format(4))
    return EXIT_OK


def _write_maps(run: Run, report: ClassificationReport):
    for name, sampled in report.maps.items():
        write_csv(run.path(f"{name}.csv"), ("t", "value"), sampled.rows())
    if report.chain is not None:
        N = report.chain.N
        write_csv(run.path("chain.csv"), ("k", "y"), zip(range(-N, N + 1), report.chain.y))


def cmd_classify(config: Config, run: Run) -> int:
    gens = config.to_generator_set()
    try:
        report = classify(gens, config.classify_config())
    except HypothesisFailure as e:
        write_json(run.path("report.json"), {"schema_version": report_schema_version, "error": str(e), "nilpotency": e.report.model_dump(mode="json")})
        raise
    except AmbiguousResolution as e:
        write_json(run.path("report.json"), e.report.model_dump(mode="json"))
        raise
    write_json(run.path("report.json"), report.model_dump(mode="json"))
    _write_maps(run, report)
    print(f"case {report.case}")
    return EXIT_OK


def cmd_orbit(config: Config, run: Run, word: str, x0: float, n: int) -> int:
    """x_k = w^k(x0) for k = 0..n; the last row is flagged when the orbit cannot be continued."""
    gens = config.to_generator_set()
    w = gens.word(word)
    rows = []
    x = x0
    for k in range(n + 1):
        if k == n:
            rows.append((k, x, ""))
            break
        try:
            following = eval_word(gens, w, x)
        except OutOfDomain:
            rows.append((k, x, "out_of_domain"))
            logger.info("orbit of %r under %s leaves the domain after %d steps", x0, gens.format(w), k)
            break
        rows.append((k, x, ""))
        x = following
    write_csv(run.path("orbit.csv"), ("k", "x", "flag"), rows)
    last = rows[-1]
    print(f"{len(rows)} points" + (f", stopped at k={last[0]} (out of domain)" if last[2] else ""))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pseudogroup", description="Near-identity nilpotent pseudogroups of (-1, 1).")
    parser.add_argument("--config", required=True, type=Path, help="JSON config file (see docs/config-schema.md).")
    parser.add_argument("--out", type=Path, default=None, help="Output directory (default: output_dir of the config).")
    parser.add_argument("--tol-identity", type=float, default=None, dest="tol_identity", help="Tolerance of identity checks.")
    parser.add_argument("--iters", type=int, default=None, help="Iterations of the translation number estimators.")
    parser.add_argument("--qmax", type=int, default=None, help="Largest denominator of rational identification.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log debug output to stderr.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {version}")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("verify", help="Check the nilpotency hypothesis, abelian and metabelian structure.")
    tau = commands.add_parser("tau", help="Relative translation number tau(f_j, f_i, x0).")
    tau.add_argument("i", help="Reference generator f_i (name or 1-based index).")
    tau.add_argument("j", help="Measured generator f_j (name or 1-based index).")
    tau.add_argument("x0", type=float)
    commands.add_parser("classify", help="Classify into one of the three cases and export conjugacy data.")
    orbit = commands.add_parser("orbit", help="Orbit of a point under a word.")
    orbit.add_argument("word", help='A word such as "f1 f2^-1"; "id" is the empty word.')
    orbit.add_argument("x0", type=float)
    orbit.add_argument("n", type=int)
    return parser


def configure_logging(verbose: bool):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    package = logging.getLogger("pseudogroup")
    package.handlers[:] = [handler]
    package.setLevel(logging.DEBUG if verbose else logging.WARNING)


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        config = Config.load(args.config).with_overrides(tol_identity=args.tol_identity, iters=args.iters, q_max=args.qmax, output_dir=args.out)
        run = Run(config, argv)
        if args.command == "verify":
            return cmd_verify(config, run)
        if args.command == "tau":
            return cmd_tau(config, run, args.i, args.j, args.x0)
        if args.command == "classify":
            return cmd_classify(config, run)
        return cmd_orbit(config, run, args.word, args.x0, args.n)
    except (HypothesisFailure, CommutatorNotFixed) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except AmbiguousResolution as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_AMBIGUOUS
    except (PseudogroupError, ValueError, ArithmeticError, OSError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
