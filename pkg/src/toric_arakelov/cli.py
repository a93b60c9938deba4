"""Command-line front end: ``toric-arakelov <subcommand> <spec> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from rich.console import Console
from rich.logging import RichHandler

from .adelic import INFINITY, MKDivisor, deg_hat, find_scaling, gap_check, lhat, parse_place, place_label
from .arakelov import (
    ZariskiRefusal,
    arithmetic_multiplicity,
    arithmetic_volumes,
    classify,
    compare_oracle,
    dirichlet_certificate,
    fujita,
    geometric_volume,
    height,
    theta_region,
    zariski,
)
from .config import LOG_LEVEL_ENV, MIN_PRECISION_BITS, get_settings, set_settings
from .divisor import validate_orthogonality
from .errors import EXIT_OK, InvalidParametersError, SpecError, ToricArakelovError
from .numerics import LogRational, as_rational
from .report import CERTIFIED, EXACT, NUMERIC, Report, report_to_markdown, report_to_table, reports_to_text
from .samples import GENERATORS, generate_example
from .specfile import DivisorSpec, load_manifest, load_spec, parse_spec

_LOGGER = logging.getLogger(__name__)

DEFAULT_ELL = 100


# ── argument helpers ───────────────────────────────────────────────────


def _fraction_list(text: str, what: str) -> Tuple[Fraction, ...]:
    try:
        return tuple(as_rational(part) for part in text.split(",") if part.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidParametersError(f"bad {what} {text!r}: {exc}") from None


def _int_list(text: str, what: str) -> Tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise InvalidParametersError(f"bad {what} {text!r}: expected comma-separated integers") from None


def _place_values(text: str, what: str) -> Dict[object, Fraction]:
    """Parse ``"inf=5/2,2=1/4"`` into a place → rational mapping."""

    values: Dict[object, Fraction] = {}
    for item in text.split(","):
        if not item.strip():
            continue
        key, sep, value = item.partition("=")
        if not sep:
            raise InvalidParametersError(f"bad {what} entry {item!r}: expected PLACE=VALUE")
        try:
            values[parse_place(key)] = as_rational(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidParametersError(f"bad {what} entry {item!r}: {exc}") from None
    return values


def _add_value(report: Report, name: str, value: object, tol: float, provenance: Optional[str] = None) -> None:
    """Add *value*, marking floats as numeric with tolerance *tol*."""

    if isinstance(value, float):
        report.add(name, value, NUMERIC, tol)
    else:
        report.add(name, value, provenance or EXACT)


def _label_map(mapping) -> Dict[str, object]:
    return {place_label(k): v for k, v in mapping.items()}


# ── subcommands on a specification ─────────────────────────────────────


def _classify(spec: DivisorSpec, args: argparse.Namespace, report: Report) -> None:
    result = classify(spec.divisor)
    tol = get_settings().oracle_tol ** 0.5
    for name, flag in result.flags().items():
        if name in result.uncertain:
            report.add(name, flag, NUMERIC, tol)
        else:
            report.add(name, flag, CERTIFIED)
    report.add("witnesses", dict(result.witnesses))
    report.add("delta", spec.divisor.delta())


def _volume(spec: DivisorSpec, args: argparse.Namespace, report: Report) -> None:
    tol = args.tol or get_settings().cubature_tol
    report.add("geometric_volume", geometric_volume(spec.divisor))
    volumes = arithmetic_volumes(spec.divisor, tol)
    _add_value(report, "arithmetic_volume", volumes.volume, volumes.tol or tol)
    _add_value(report, "chi_volume", volumes.chi_volume, volumes.tol or tol)


def _height(spec: DivisorSpec, args: argparse.Namespace, report: Report) -> None:
    tol = args.tol or get_settings().cubature_tol
    cone = _int_list(args.cone, "cone") if args.cone else None
    place = parse_place(args.place) if args.place else None
    result = height(spec.divisor, cone, place, tol)
    report.add("cone", list(cone or ()))
    report.add("face_dimension", result.face_dimension)
    _add_value(report, "height", result.value, tol)


def _theta(spec: DivisorSpec, args: argparse.Namespace, report: Report) -> None:
    region = theta_region(spec.divisor)
    report.add("quasi_rational", region.quasi_rational)
    report.add("empty", region.is_empty)
    if region.polytope is not None:
        provenance = EXACT if region.provenance == EXACT else CERTIFIED
        report.add("theta", region.polytope, provenance)
    else:
        report.add("theta", None, NUMERIC, get_settings().oracle_tol)


def _zariski(spec: DivisorSpec, args: argparse.Namespace, report: Report) -> None:
    tol = args.tol or get_settings().cubature_tol
    result = zariski(spec.divisor)
    report.add("quasi_rational", result.theta.quasi_rational)
    if isinstance(result, ZariskiRefusal):
        report.add("decomposition", "refused")
        report.add("reason", result.reason)
        return
    report.add("decomposition", "strong" if result.strong else "weak")
    report.add("fan", {"rays": [list(r) for r in result.fan.rays], "cones": [list(c) for c in result.fan.cones]})
    report.add("nef_polytope", result.nef_part.delta())
    _add_value(report, "volume", result.volume, tol)
    _add_value(report, "nef_volume", result.nef_volume, tol)
    report.add("nef_verified", result.nef_verified, CERTIFIED)
    report.add("effective_verified", result.effective_verified, CERTIFIED)
    report.add("volume_verified", result.volume_verified, CERTIFIED)


def _fujita(spec: DivisorSpec, args: argparse.Namespace, report: Report) -> None:
    if args.eps is None:
        raise InvalidParametersError("fujita needs --eps")
    tol = args.tol or get_settings().cubature_tol
    eps = as_rational(args.eps)
    result = fujita(spec.divisor, eps, tol)
    report.add("eps", eps)
    report.add("shrink", result.shrink)
    report.add("ample_polytope", result.ample_part.delta())
    _add_value(report, "volume", result.volume, tol)
    _add_value(report, "ample_volume", result.ample_volume, tol)
    report.add("ample_verified", result.ample_verified, CERTIFIED)
    report.add("effective_verified", result.effective_verified, CERTIFIED)


def _dirichlet(spec: DivisorSpec, args: argparse.Namespace, report: Report) -> None:
    if not args.point:
        raise InvalidParametersError("dirichlet needs --point")
    result = dirichlet_certificate(spec.divisor, _fraction_list(args.point, "point"))
    numeric = any(isinstance(v, float) for v in list(result.gammas.values()) + list(result.betas.values()))
    tol = get_settings().oracle_tol
    report.add("point", result.point)
    if numeric:
        report.add("gammas", _label_map(result.gammas), NUMERIC, tol)
        report.add("betas", _label_map(result.betas), NUMERIC, tol)
    else:
        report.add("gammas", _label_map(result.gammas))
        report.add("betas", _label_map(result.betas))
    report.add("shifted_delta", result.shifted.delta())
    report.add("verified", result.verified, CERTIFIED)


def _multiplicity(spec: DivisorSpec, args: argparse.Namespace, report: Report) -> None:
    if not args.ray:
        raise InvalidParametersError("multiplicity needs --ray")
    ray = _int_list(args.ray, "ray")
    result = arithmetic_multiplicity(spec.divisor, ray)
    report.add("ray", list(ray))
    _add_value(report, "multiplicity", result.value, get_settings().oracle_tol)


def _oracle(spec: DivisorSpec, args: argparse.Namespace, report: Report) -> None:
    ells = args.ell or [spec.options.ell or DEFAULT_ELL]
    rows = compare_oracle(spec.divisor, ells, args.tol)
    for row in rows:
        report.add(
            f"oracle[ell={row.ell}]",
            {"estimate": row.estimate, "reference": row.reference, "gap": row.gap},
            NUMERIC,
            row.gap,
        )


def _orthogonality(spec: DivisorSpec, args: argparse.Namespace, report: Report) -> None:
    result = validate_orthogonality(spec.divisor, args.trials, seed=args.seed)
    report.add("sections", result.sections)
    for i, trial in enumerate(result.trials):
        report.add(
            f"trial[{i}]",
            {"lower": trial.lower, "estimate": trial.estimate, "upper": trial.upper, "ok": trial.ok},
            NUMERIC,
            trial.slack,
        )
    report.add(
        "non_archimedean",
        {
            place_label(f.place): {"max_formula": f.max_formula, "direct": f.direct, "ok": f.ok}
            for f in result.non_archimedean
        },
    )
    report.add("ok", result.ok, CERTIFIED)


SPEC_COMMANDS: Dict[str, Callable[[DivisorSpec, argparse.Namespace, Report], None]] = {
    "classify": _classify,
    "volume": _volume,
    "height": _height,
    "theta": _theta,
    "zariski": _zariski,
    "fujita": _fujita,
    "dirichlet": _dirichlet,
    "multiplicity": _multiplicity,
    "oracle": _oracle,
    "validate-orthogonality": _orthogonality,
}


# ── adelic subcommand ──────────────────────────────────────────────────


def _adelic(args: argparse.Namespace, report: Report) -> None:
    if args.action in {"lhat", "gap"}:
        if not args.c:
            raise InvalidParametersError(f"adelic {args.action} needs --c")
        c = MKDivisor(_place_values(args.c, "--c"))
        if args.action == "lhat":
            result = lhat(c)
            report.add("count", result.count)
            if isinstance(result.value, float):
                report.add("lhat", result.value, NUMERIC, 1e-12)
            else:
                report.add("lhat", result.value)
            report.add("deg_hat", deg_hat(c))
        else:
            check = gap_check(c)
            if isinstance(check.gap, float):
                report.add("gap", check.gap, NUMERIC, 1e-12)
            else:
                report.add("gap", check.gap)
            report.add("bound", check.bound)
            report.add("ok", check.ok, CERTIFIED)
        return
    if not args.gamma:
        raise InvalidParametersError("adelic scaling needs --gamma")
    log_gamma = {place: LogRational.log_of(value) for place, value in _place_values(args.gamma, "--gamma").items()}
    strict = [parse_place(p) for p in args.strict.split(",") if p.strip()] if args.strict else [INFINITY]
    witness = find_scaling(log_gamma, strict, args.eta, args.ell[0] if args.ell else None)
    report.add("ell", witness.ell)
    report.add("ell0", witness.ell0)
    report.add("exponents", {str(p): e for p, e in witness.exponents.items()})
    report.add("alpha", witness.alpha)
    report.add("margins", _label_map(witness.margins))
    report.add("ok", witness.ok, CERTIFIED)


# ── parser ─────────────────────────────────────────────────────────────


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, metavar="PATH", help="Write the JSON report to PATH.")
    common.add_argument("--tol", type=float, metavar="X", help="Numeric tolerance for cubature paths.")
    common.add_argument("--precision", type=int, metavar="BITS", help="Starting interval precision in bits.")
    common.add_argument("--log-level", metavar="LEVEL", help=f"Logging level (default from {LOG_LEVEL_ENV}).")
    common.add_argument("--table", action="store_true", help="Print a Rich table instead of JSON on stdout.")
    common.add_argument("--markdown", type=Path, metavar="PATH", help="Write a Markdown summary to PATH.")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="toric-arakelov",
        description="Arithmetic invariants of toric metrized R-divisors over Q",
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    helps = {
        "classify": "Decide ample, nef, big, pseudo-effective and effective.",
        "volume": "Geometric, arithmetic and χ-volumes.",
        "height": "Height of the variety or of an orbit closure.",
        "theta": "The Θ-region where the roof is nonnegative.",
        "zariski": "Toric Zariski decomposition or a refusal.",
        "fujita": "Ample approximation within ε of the arithmetic volume.",
        "dirichlet": "Effective shift certificate at a point of Θ.",
        "multiplicity": "Arithmetic multiplicity along a toric valuation.",
        "oracle": "Lattice-sum estimates of the arithmetic volume.",
        "validate-orthogonality": "Check the sup-norm sandwich for random sections.",
    }
    for name, text in helps.items():
        sub = commands.add_parser(name, parents=[common], help=text, description=text)
        sub.add_argument("spec", type=Path, help="Divisor specification or manifest (JSON).")
        if name == "height":
            sub.add_argument("--cone", metavar="I,J", help="Ray indices spanning the cone (default: zero cone).")
            sub.add_argument("--place", metavar="PLACE", help="Use the local roof at PLACE.")
        elif name == "fujita":
            sub.add_argument("--eps", metavar="X", help="Allowed volume loss, e.g. 1/20.")
        elif name == "dirichlet":
            sub.add_argument("--point", metavar='"A1/B1,A2/B2"', help="Rational point of Θ.")
        elif name == "multiplicity":
            sub.add_argument("--ray", metavar='"1,1"', help="Primitive vector of N.")
        elif name == "oracle":
            sub.add_argument("--ell", type=int, action="append", metavar="N", help="Dilation factor (repeatable).")
        elif name == "validate-orthogonality":
            sub.add_argument("--trials", type=int, default=8, metavar="N", help="Random sections (default: 8).")
            sub.add_argument("--seed", type=int, default=0, metavar="N", help="Random seed (default: 0).")

    adelic = commands.add_parser("adelic", parents=[common], help="Small elements of Q and the scaling lemma.")
    adelic.add_argument("action", choices=["lhat", "gap", "scaling"])
    adelic.add_argument("--c", metavar="inf=X,P=Y", help="The M_Q-divisor c.")
    adelic.add_argument("--gamma", metavar="inf=X,P=Y", help="Positive bounds γ_v with Π γ_v < 1.")
    adelic.add_argument("--strict", metavar="inf,P", help="Places needing strict inequality (default: inf).")
    adelic.add_argument("--eta", default="1", metavar="X", help="Strictness bound η in (0, 1].")
    adelic.add_argument("--ell", type=int, action="append", metavar="N", help="Exponent ℓ (default: ℓ₀).")

    generate = commands.add_parser("generate", parents=[common], help="Write an example specification.")
    generate.add_argument("name", choices=sorted(GENERATORS))
    generate.add_argument("params", nargs="*", help="Generator parameters.")
    return parser


# ── driver ─────────────────────────────────────────────────────────────


def _configure_logging(level_name: Optional[str], stderr: Console) -> None:
    level_name = (level_name or get_settings().log_level).upper()
    level = logging.getLevelName(level_name)
    if not isinstance(level, int):
        raise InvalidParametersError(f"unknown log level {level_name!r}")
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=stderr, show_path=False)],
        force=True,
    )


def _settings_for(args: argparse.Namespace, spec: Optional[DivisorSpec]):
    settings = get_settings()
    options = spec.options if spec is not None else None
    precision = args.precision or (options.precision if options else None)
    if precision is not None:
        if not MIN_PRECISION_BITS <= precision <= settings.precision_cap_bits:
            raise InvalidParametersError(
                f"precision must lie in [{MIN_PRECISION_BITS}, {settings.precision_cap_bits}] bits"
            )
        settings = dataclasses.replace(settings, precision_bits=precision)
    tol = args.tol or (options.tol if options else None)
    if tol is not None:
        if not tol > 0:
            raise InvalidParametersError("--tol must be positive")
        settings = dataclasses.replace(settings, cubature_tol=tol)
    return settings


def _spec_paths(path: Path) -> List[Path]:
    manifest = load_manifest(path)
    return [path] if manifest is None else manifest


def _run_spec(path: Path, args: argparse.Namespace, command: List[str]) -> Report:
    spec = load_spec(path)
    original = get_settings()
    set_settings(_settings_for(args, spec))
    started = time.perf_counter()
    try:
        report = Report(command, str(path), spec.digest)
        SPEC_COMMANDS[args.command](spec, args, report)
    finally:
        set_settings(original)
    report.elapsed = time.perf_counter() - started
    _LOGGER.info("%s on %s finished in %.3fs", args.command, path, report.elapsed)
    return report


def _emit(reports: List[Report], args: argparse.Namespace, stdout: Console) -> None:
    text = reports_to_text(reports)
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    if args.table:
        for report in reports:
            stdout.print(report_to_table(report))
    elif not args.out:
        stdout.out(text, end="", highlight=False)
    if args.markdown:
        args.markdown.write_text("\n\n".join(report_to_markdown(r) for r in reports) + "\n", encoding="utf-8")


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point used by the ``toric-arakelov`` console script.

    Returns the process exit code: 0 on success, 2 for parse errors, 3 for
    violated preconditions and 4 when a computation budget is exhausted.
    """

    parser = build_parser()
    args = parser.parse_args(argv)
    command = list(sys.argv[1:] if argv is None else argv)
    stderr = Console(stderr=True, highlight=False)
    stdout = Console(highlight=False, soft_wrap=True)
    try:
        _configure_logging(args.log_level, stderr)
        if args.command == "generate":
            document = generate_example(args.name, args.params)
            parse_spec(document, source=f"generate {args.name}")
            text = json.dumps(document, indent=2, ensure_ascii=False) + "\n"
            if args.out:
                args.out.write_text(text, encoding="utf-8")
            else:
                stdout.out(text, end="", highlight=False)
            return EXIT_OK
        if args.command == "adelic":
            original = get_settings()
            set_settings(_settings_for(args, None))
            try:
                report = Report(command)
                started = time.perf_counter()
                _adelic(args, report)
                report.elapsed = time.perf_counter() - started
            finally:
                set_settings(original)
            _emit([report], args, stdout)
            return EXIT_OK
        reports = [_run_spec(path, args, command) for path in _spec_paths(args.spec)]
        _emit(reports, args, stdout)
    except ToricArakelovError as exc:
        stderr.print(f"error: {exc.code}: {exc.message}", markup=False)
        return exc.exit_code
    except OSError as exc:
        stderr.print(f"error: io: {exc}", markup=False)
        return SpecError.exit_code
    return EXIT_OK


__all__ = ["SPEC_COMMANDS", "build_parser", "run"]
