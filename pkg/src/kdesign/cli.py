"""kdesign command line
Every experiment is a subcommand that writes one JSON or CSV report.

Exit codes: 0 success, 1 other library error, 2 precondition or usage error,
3 resource limit exceeded.
"""

from collections.abc import Callable
from dataclasses import dataclass
import itertools
import logging
import math
from pathlib import Path
import time
from typing import Annotated, Any

import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table
import typer

from kdesign.__about__ import __version__
from kdesign.config import Settings
from kdesign.designmetrics import (
    ExperimentPlan,
    choi_error,
    measurable_experiment,
    random_plan,
    state_design_error,
    verify_blocked_phase_identity,
    verify_fact2,
    verify_fact5,
    verify_pfc_fact1,
)
from kdesign.exceptions import DesignError, PreconditionError, ResourceLimitError
from kdesign.gf2field import (
    MAX_M,
    clmul_int,
    field_spec,
    is_irreducible,
    mul_int,
    poly_divmod,
)
from kdesign.kwise import KWiseSeed, eval_vector, verify_kwise
from kdesign.lbtest import (
    CollisionConfig,
    collision_lower_bound,
    haar_collision_rate,
    predicted_advantage,
    run_collision_test,
    threshold_star,
    tvd_bernoulli_product,
)
from kdesign.models import (
    CircuitMode,
    DesignFamily,
    EnsembleSpec,
    Independence,
    MomentMode,
    ReportFormat,
    RunConfig,
    TwirlSource,
    Variant,
)
from kdesign.quantsim import PatchLayout, StateVec, distinct_dimension
from kdesign.reports import ResultRecord, write_report
from kdesign.revcircuit import build_kwise_circuit, resource_table, simulate_registers
from kdesign.seeding import SampleHandle

logger = logging.getLogger(__name__)

err_console = Console(stderr=True)

app = typer.Typer(name="kdesign", help="Low-depth random designs: build, audit, distinguish.")
field_app = typer.Typer(help="Finite-field self checks.")
kwise_app = typer.Typer(help="k-wise independent function checks.")
circuit_app = typer.Typer(help="Reversible circuit construction.")
resources_app = typer.Typer(help="Design resource estimates.")
verify_app = typer.Typer(help="Numerical checks of the operator identities.")
app.add_typer(field_app, name="field")
app.add_typer(kwise_app, name="kwise")
app.add_typer(circuit_app, name="circuit")
app.add_typer(resources_app, name="resources")
app.add_typer(verify_app, name="verify")

SeedOpt = Annotated[int | None, typer.Option("--seed", help="Master seed (64-bit).")]
OutOpt = Annotated[Path | None, typer.Option("--out", help="Report path.")]
FormatOpt = Annotated[ReportFormat, typer.Option("--format", help="Report format.")]
VerboseOpt = Annotated[bool, typer.Option("--verbose", help="Log at DEBUG level.")]
WorkersOpt = Annotated[int | None, typer.Option("--workers", help="Monte-Carlo threads.")]
NOpt = Annotated[int, typer.Option("--n", help="Qubits.")]
KOpt = Annotated[int, typer.Option("--k", help="Moment order or query count.")]
XiOpt = Annotated[int | None, typer.Option("--xi", help="Patch size.")]
POpt = Annotated[int | None, typer.Option("--p", help="Amplification rounds.")]
FamilyOpt = Annotated[Variant, typer.Option("--family", help="Ensemble variant.")]
IndepOpt = Annotated[
    int | None, typer.Option("--independence", help="Use k-wise functions of this order.")
]
ModeOpt = Annotated[MomentMode, typer.Option("--mode", help="Exact enumeration or sampling.")]
TrialsOpt = Annotated[int, typer.Option("--trials", help="Monte-Carlo draws.")]
ResamplesOpt = Annotated[int | None, typer.Option("--resamples", help="Bootstrap resamples.")]


@dataclass
class _Common:
    seed: int | None
    out: Path | None
    fmt: ReportFormat
    verbose: bool
    workers: int | None = None


def _configure_logging(settings: Settings, verbose: bool) -> None:
    level = "DEBUG" if verbose else settings.log_level
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def _jsonable(params: dict[str, Any]) -> dict[str, Any]:
    return {
        key: value.value if hasattr(value, "value") else value
        for key, value in params.items()
        if value is not None
    }


def _execute(
    name: str,
    params: dict[str, Any],
    common: _Common,
    body: Callable[[SampleHandle, Settings], dict[str, Any]],
) -> None:
    """Resolve settings, run ``body`` and write its report; errors become exit codes."""
    settings = Settings(master_seed=common.seed, workers=common.workers)
    _configure_logging(settings, common.verbose)
    if not settings.validate():
        err_console.print("[red]Invalid settings; check KDESIGN_* environment variables[/red]")
        raise typer.Exit(2)
    slug = name.replace(" ", "_")
    target = common.out or Path(settings.output_dir) / f"{slug}.{common.fmt.value}"
    clean = _jsonable(params)
    config = RunConfig(
        subcommand=name,
        params=clean,
        master_seed=settings.master_seed,
        output_path=str(target),
        format=common.fmt,
        workers=settings.workers,
    )
    handle = SampleHandle.root(settings=settings).child(slug)
    start = time.perf_counter()
    try:
        fields = body(handle, settings)
    except (PreconditionError, ValidationError) as e:
        err_console.print(f"[red]Precondition failed:[/red] {e}")
        raise typer.Exit(2) from e
    except ResourceLimitError as e:
        err_console.print(f"[red]Resource limit:[/red] {e}")
        raise typer.Exit(3) from e
    except DesignError as e:
        err_console.print(f"[red]Error:[/red] {e}")
        raise typer.Exit(1) from e
    failed = bool(fields.pop("failed", False))
    record = ResultRecord(
        op=name,
        params=clean,
        master_seed=settings.master_seed,
        config=config,
        elapsed_ms=round((time.perf_counter() - start) * 1000, 3),
        **fields,
    )
    path = write_report(record, target, common.fmt)
    summary = ", ".join(
        f"{key}={getattr(record, key)}"
        for key in ("estimate", "std_error", "residual", "samples")
        if getattr(record, key) is not None
    )
    err_console.print(f"[green]{name}[/green] {summary} -> {path}")
    if failed:
        raise typer.Exit(1)


def _spec(
    family: Variant,
    n: int,
    xi: int | None,
    p: int | None,
    independence: int | None,
) -> EnsembleSpec:
    mode = Independence.kwise(independence) if independence else Independence.exact()
    return EnsembleSpec(variant=family, n=n, xi=xi, p=p, independence=mode)


def _estimate_fields(est: Any) -> dict[str, Any]:
    return {
        "estimate": est.estimate,
        "std_error": est.std_error,
        "samples": est.samples,
        "details": est.model_dump(mode="json"),
    }


def _print_version(value: bool) -> None:
    if value:
        typer.echo(__version__)
        raise typer.Exit()


@app.callback()
def main(
    version: Annotated[
        bool,
        typer.Option(
            "--version", callback=_print_version, is_eager=True, help="Print the version."
        ),
    ] = False,
) -> None:
    """Low-depth random designs: build, audit, distinguish."""


# ============== Field and hashing ==============


@field_app.command("selftest")
def field_selftest(
    m_max: Annotated[int, typer.Option("--m-max", help="Exhaustive up to this width.")] = 4,
    random_pairs: Annotated[int, typer.Option("--random-pairs")] = 100_000,
    seed: SeedOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = ReportFormat.JSON,
    verbose: VerboseOpt = False,
) -> None:
    """Compare Barrett multiplication with long division and audit the polynomial table."""

    def body(handle: SampleHandle, settings: Settings) -> dict[str, Any]:
        mismatches = 0
        checked = 0
        for m in range(1, m_max + 1):
            spec = field_spec(m)
            for a, b in itertools.product(range(spec.order), repeat=2):
                mismatches += mul_int(a, b, spec) != poly_divmod(clmul_int(a, b), spec.p_bits)[1]
                checked += 1
        rng = handle.rng()
        for m in (8, 16, 32):
            spec = field_spec(m)
            words = rng.integers(0, spec.order, size=(random_pairs, 2), dtype=np.uint64)
            for a, b in words.tolist():
                mismatches += mul_int(a, b, spec) != poly_divmod(clmul_int(a, b), spec.p_bits)[1]
                checked += 1
        reducible = [m for m in range(1, MAX_M + 1) if not is_irreducible(field_spec(m).p_bits)]
        return {
            "residual": float(mismatches),
            "samples": checked,
            "details": {"mismatches": mismatches, "reducible_widths": reducible},
            "failed": bool(mismatches or reducible),
        }

    params = {"m_max": m_max, "random_pairs": random_pairs}
    _execute("field selftest", params, _Common(seed, out, fmt, verbose), body)


@kwise_app.command("verify")
def kwise_verify(
    m: Annotated[int, typer.Option("--m", help="Field width.")] = 3,
    k: Annotated[int, typer.Option("--k", help="Independence.")] = 2,
    seed: SeedOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = ReportFormat.JSON,
    verbose: VerboseOpt = False,
) -> None:
    """Exact joint distribution over every distinct point set of size at most k."""

    def body(handle: SampleHandle, settings: Settings) -> dict[str, Any]:
        spec = field_spec(m)
        checks = sum(math.comb(spec.order, t) * spec.order**t for t in range(1, k + 1))
        if checks > 200_000:
            raise ResourceLimitError("k-wise checks", checks, 200_000)
        worst = 0.0
        rows = []
        for t in range(1, k + 1):
            expected = 1 / spec.order**t
            bad = 0
            for points in itertools.combinations(range(spec.order), t):
                for targets in itertools.product(range(spec.order), repeat=t):
                    gap = abs(float(verify_kwise(spec, k, points, targets)) - expected)
                    worst = max(worst, gap)
                    bad += gap > 0
            rows.append({"t": t, "expected": expected, "violations": bad})
        return {"residual": worst, "samples": checks, "rows": rows, "failed": worst > 0}

    _execute("kwise verify", {"m": m, "k": k}, _Common(seed, out, fmt, verbose), body)


@circuit_app.command("build")
def circuit_build(
    m: Annotated[int, typer.Option("--m", help="Field width.")] = 3,
    k: Annotated[int, typer.Option("--k", help="Independence.")] = 2,
    mode: Annotated[CircuitMode, typer.Option("--mode")] = CircuitMode.LOW_DEPTH,
    check: Annotated[int, typer.Option("--check", help="Random inputs to simulate.")] = 1000,
    circuit_out: Annotated[Path | None, typer.Option("--circuit-out")] = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = ReportFormat.JSON,
    verbose: VerboseOpt = False,
) -> None:
    """Build the k-wise function circuit, check it against the polynomial and save it."""

    def body(handle: SampleHandle, settings: Settings) -> dict[str, Any]:
        spec = field_spec(m)
        circuit = build_kwise_circuit(spec, k, mode)
        mismatches = 0
        if check:
            rng = handle.rng()
            xs = rng.integers(0, spec.order, size=check, dtype=np.uint64)
            seeds = rng.integers(0, spec.order, size=(k, check), dtype=np.uint64)
            values = {"x": xs, **{f"a{i}": seeds[i] for i in range(k)}}
            got = simulate_registers(circuit, values)["out"]
            for j in range(check):
                poly = [int(seeds[i, j]) for i in range(k)]
                want = eval_vector(KWiseSeed.from_words(spec, poly), [int(xs[j])])[0]
                mismatches += int(got[j] != want)
        path = circuit_out or Path(settings.output_dir) / f"kwise_m{m}_k{k}_{mode.value}.circ"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(circuit.to_text(), encoding="utf-8")
        resources = circuit.resources(mode)
        return {
            "residual": float(mismatches),
            "samples": check,
            "details": {"circuit_path": str(path), **resources.model_dump(mode="json")},
            "failed": mismatches > 0,
        }

    params = {"m": m, "k": k, "mode": mode, "check": check}
    _execute("circuit build", params, _Common(seed, out, fmt, verbose), body)


@resources_app.command("table")
def resources_table(
    n: NOpt = 16,
    k: KOpt = 2,
    eps: Annotated[float, typer.Option("--eps", help="Target additive error.")] = 0.1,
    family: Annotated[
        DesignFamily | None, typer.Option("--family", help="Only this design family.")
    ] = None,
    mode: Annotated[CircuitMode | None, typer.Option("--mode", help="Only this schedule.")] = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = ReportFormat.JSON,
    verbose: VerboseOpt = False,
) -> None:
    """Depth, ancilla and randomness of the blocked designs at the derived patch size."""

    def body(handle: SampleHandle, settings: Settings) -> dict[str, Any]:
        reports = resource_table(n, k, eps, family, mode)
        table = Table(title=f"Blocked designs, n={n} k={k} eps={eps}")
        for column in ("family", "mode", "xi", "depth", "ancilla", "random bits"):
            table.add_column(column)
        rows = []
        for r in reports:
            row = r.model_dump(mode="json")
            rows.append(row)
            table.add_row(
                row["family"],
                row["mode"],
                str(r.xi),
                f"{r.depth_expr} = {r.depth}",
                f"{r.ancilla_expr} = {r.ancilla}",
                str(r.randomness_bits),
            )
        err_console.print(table)
        return {"rows": rows}

    params = {"n": n, "k": k, "eps": eps, "family": family, "mode": mode}
    _execute("resources table", params, _Common(seed, out, fmt, verbose), body)


# ============== Design errors ==============


@app.command("state-error")
def state_error(
    family: FamilyOpt = Variant.RANDOM_PHASE,
    n: NOpt = 2,
    k: KOpt = 2,
    xi: XiOpt = None,
    p: POpt = None,
    independence: IndepOpt = None,
    mode: ModeOpt = MomentMode.EXACT_ENUM,
    trials: TrialsOpt = 1000,
    resamples: ResamplesOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = ReportFormat.JSON,
    verbose: VerboseOpt = False,
    workers: WorkersOpt = None,
) -> None:
    """Trace distance between the ensemble's k-th state moment and Haar's."""

    def body(handle: SampleHandle, settings: Settings) -> dict[str, Any]:
        spec = _spec(family, n, xi, p, independence)
        est = state_design_error(
            spec, k, mode, trials, handle, settings.workers, resamples, settings
        )
        return _estimate_fields(est)

    params = {
        "family": family,
        "n": n,
        "k": k,
        "xi": xi,
        "p": p,
        "independence": independence,
        "mode": mode,
        "trials": trials,
    }
    _execute("state-error", params, _Common(seed, out, fmt, verbose, workers), body)


@app.command("choi-error")
def choi_error_cmd(
    family: FamilyOpt = Variant.PFC,
    n: NOpt = 1,
    k: KOpt = 2,
    xi: XiOpt = None,
    p: POpt = None,
    independence: IndepOpt = None,
    mode: ModeOpt = MomentMode.EXACT_ENUM,
    trials: TrialsOpt = 1000,
    resamples: ResamplesOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = ReportFormat.JSON,
    verbose: VerboseOpt = False,
    workers: WorkersOpt = None,
) -> None:
    """Choi-state distance to the Haar twirl (a lower bound on the diamond distance)."""

    def body(handle: SampleHandle, settings: Settings) -> dict[str, Any]:
        spec = _spec(family, n, xi, p, independence)
        est = choi_error(spec, k, mode, trials, handle, settings.workers, resamples, settings)
        return _estimate_fields(est)

    params = {
        "family": family,
        "n": n,
        "k": k,
        "xi": xi,
        "p": p,
        "independence": independence,
        "mode": mode,
        "trials": trials,
    }
    _execute("choi-error", params, _Common(seed, out, fmt, verbose, workers), body)


@app.command("measurable")
def measurable(
    family: FamilyOpt = Variant.LRFC,
    n: NOpt = 2,
    k: KOpt = 2,
    xi: XiOpt = None,
    p: POpt = None,
    independence: IndepOpt = None,
    m_anc: Annotated[int, typer.Option("--m-anc", help="Ancilla qubits.")] = 1,
    identity_plan: Annotated[bool, typer.Option("--identity-plan")] = False,
    mode: ModeOpt = MomentMode.EXACT_ENUM,
    trials: TrialsOpt = 1000,
    resamples: ResamplesOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = ReportFormat.JSON,
    verbose: VerboseOpt = False,
    workers: WorkersOpt = None,
) -> None:
    """Output-state distance for one sequential k-query experiment."""

    def body(handle: SampleHandle, settings: Settings) -> dict[str, Any]:
        spec = _spec(family, n, xi, p, independence)
        if identity_plan:
            plan = ExperimentPlan.identity(n, k, m_anc)
        else:
            plan = random_plan(n, k, m_anc, handle)
        est = measurable_experiment(
            spec, plan, trials, mode, handle, settings.workers, resamples, settings
        )
        return _estimate_fields(est)

    params = {
        "family": family,
        "n": n,
        "k": k,
        "xi": xi,
        "p": p,
        "independence": independence,
        "m_anc": m_anc,
        "identity_plan": identity_plan,
        "mode": mode,
        "trials": trials,
    }
    _execute("measurable", params, _Common(seed, out, fmt, verbose, workers), body)


# ============== Identity checks ==============


@verify_app.command("fact1")
def verify_fact1_cmd(
    n: NOpt = 1,
    k: KOpt = 2,
    seed: SeedOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = ReportFormat.JSON,
    verbose: VerboseOpt = False,
) -> None:
    """Permutation-phase twirl of the Bell projector on the distinct subspace."""

    def body(handle: SampleHandle, settings: Settings) -> dict[str, Any]:
        return {"residual": verify_pfc_fact1(n, k)}

    _execute("verify fact1", {"n": n, "k": k}, _Common(seed, out, fmt, verbose), body)


@verify_app.command("fact2")
def verify_fact2_cmd(
    n: NOpt = 2,
    k: KOpt = 2,
    source: Annotated[TwirlSource, typer.Option("--source")] = TwirlSource.CLIFFORD,
    trials: TrialsOpt = 10_000,
    resamples: ResamplesOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = ReportFormat.JSON,
    verbose: VerboseOpt = False,
    workers: WorkersOpt = None,
) -> None:
    """Distance of the twirled distinct projector from the identity."""

    def body(handle: SampleHandle, settings: Settings) -> dict[str, Any]:
        est = verify_fact2(n, k, source, trials, handle, settings.workers, resamples, settings)
        fields = _estimate_fields(est)
        fields["details"]["bound"] = k * k / 2**n
        return fields

    params = {"n": n, "k": k, "source": source, "trials": trials}
    _execute("verify fact2", params, _Common(seed, out, fmt, verbose, workers), body)


@verify_app.command("fact5")
def verify_fact5_cmd(
    n: NOpt = 1,
    k: KOpt = 2,
    m_anc: Annotated[int, typer.Option("--m-anc")] = 1,
    plans: Annotated[int, typer.Option("--plans", help="Random plans to try.")] = 20,
    seed: SeedOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = ReportFormat.JSON,
    verbose: VerboseOpt = False,
) -> None:
    """Post-selection trace identity on random experiment plans."""

    def body(handle: SampleHandle, settings: Settings) -> dict[str, Any]:
        expected = distinct_dimension(1 << n, k) / 2 ** (n * k)
        values = [
            verify_fact5(random_plan(n, k, m_anc, handle.child(f"plan{i}")))
            for i in range(plans)
        ]
        residual = max(abs(v - expected) for v in values) if values else 0.0
        return {
            "estimate": expected,
            "residual": residual,
            "samples": plans,
            "details": {"values": values},
        }

    params = {"n": n, "k": k, "m_anc": m_anc, "plans": plans}
    _execute("verify fact5", params, _Common(seed, out, fmt, verbose), body)


@verify_app.command("blocked-identity")
def verify_blocked_identity_cmd(
    n: NOpt = 2,
    xi: Annotated[int, typer.Option("--xi")] = 1,
    k: KOpt = 2,
    seed: SeedOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = ReportFormat.JSON,
    verbose: VerboseOpt = False,
) -> None:
    """Blocked and global phase moments agree on the local distinct subspace."""

    def body(handle: SampleHandle, settings: Settings) -> dict[str, Any]:
        return {"residual": verify_blocked_phase_identity(n, xi, k)}

    params = {"n": n, "xi": xi, "k": k}
    _execute("verify blocked-identity", params, _Common(seed, out, fmt, verbose), body)


# ============== Distinguisher ==============


@app.command("distinguish")
def distinguish(
    family: FamilyOpt = Variant.HAAR,
    n: NOpt = 8,
    patch: Annotated[int, typer.Option("--xi", help="Test patch size in qubits.")] = 1,
    block_xi: Annotated[
        int | None, typer.Option("--block-xi", help="Patch size of a blocked source.")
    ] = None,
    independence: IndepOpt = None,
    product_state: Annotated[bool, typer.Option("--product-state")] = False,
    fixed_basis: Annotated[bool, typer.Option("--fixed-basis")] = False,
    s_star: Annotated[float | None, typer.Option("--s-star")] = None,
    trials: TrialsOpt = 10_000,
    seed: SeedOpt = None,
    out: OutOpt = None,
    fmt: FormatOpt = ReportFormat.JSON,
    verbose: VerboseOpt = False,
) -> None:
    """Patchwise collision test against Haar states."""

    def body(handle: SampleHandle, settings: Settings) -> dict[str, Any]:
        layout = PatchLayout(n=n, xi=patch)
        cfg = CollisionConfig(
            layout=layout, trials=trials, s_star=s_star, fixed_basis=fixed_basis
        )
        source: EnsembleSpec | StateVec
        if product_state:
            source = StateVec.basis(n, 0)
        else:
            source = _spec(family, n, block_xi, None, independence)
        report = run_collision_test(source, cfg, handle)
        q_h = haar_collision_rate(n, patch)
        q_f = collision_lower_bound(patch)
        return {
            "estimate": report.advantage if report.advantage is not None else report.accept_rate,
            "std_error": report.advantage_stderr,
            "samples": trials,
            "rows": report.rows(),
            "details": {
                **report.model_dump(mode="json"),
                "haar_rate": q_h,
                "product_bound": q_f,
                "threshold_star": threshold_star(patch, layout.count),
                "predicted_advantage": predicted_advantage(n, patch),
                "tvd_bound": tvd_bernoulli_product(q_h, q_f, layout.count),
            },
        }

    params = {
        "family": family,
        "n": n,
        "xi": patch,
        "block_xi": block_xi,
        "independence": independence,
        "product_state": product_state,
        "fixed_basis": fixed_basis,
        "s_star": s_star,
        "trials": trials,
    }
    _execute("distinguish", params, _Common(seed, out, fmt, verbose), body)
