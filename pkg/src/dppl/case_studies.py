"""Case-study programs: generators, bundled copies and Python drivers.

The core calculus has no recursion, so solutions on a time grid are built by
folding ``solve`` over the grid intervals, one ``let`` per interval.  Those
programs are generated as source text here; the copies bundled under
``dppl/programs`` are rewritten with ``python -m dppl.case_studies``.

The Lotka-Volterra model, with prey growth rate ``th`` as the parameter::

    dy1/dx = th * y1 - b * y1 * y2        (prey)
    dy2/dx = c * y1 * y2 - d * y2         (predators)
"""

from __future__ import annotations

import sys
from pathlib import Path

from dppl.dist import derive
from dppl.infer import EmpiricalDist, materialize, toplevel_stream
from dppl.machine import Evaluator, InferV
from dppl.parser import parse
from dppl.runtime import Runtime
from dppl.typer import check_program

PROGRAM_DIR = Path(__file__).parent / "programs"

LV_B, LV_C, LV_D = 1.0, 1.0, 3.0
LV_Y0 = (1.0, 1.0)
TRUE_THETA = 1.5
SWEEP = (1.0, 1.5, 2.0)

# synthetic data for the estimation model
DATA_POINTS = 11
DATA_DT = 0.1
NOISE_SD = 0.2          # variance 0.04

# random ODE trace grid
RODE_POINTS = 20
RODE_DT = 0.05
RODE_Y0 = 1.0


def num(x: float) -> str:
    s = repr(float(x))
    return f"({s})" if s.startswith("-") else s


def _tuple(items) -> str:
    return "(" + ", ".join(items) + ")"


def lv_ode(c: str = "A") -> str:
    """``lam th. lam (x, y). f(x, y; th)`` with coeffect ``c`` on the reals."""
    return (
        f"lam th: Real{c}. lam (x, y): (RealN, (Real{c}, Real{c})).\n"
        f"    (th * y.1 - {num(LV_B)} * y.1 * y.2, {num(LV_C)} * y.1 * y.2 - {num(LV_D)} * y.2)"
    )


def _fold(rhs, y0: str, steps: int, dt: float, name: str = "y", indent: str = "  ") -> list:
    """Lines ``let y0 = .. in let y1 = solve rhs y0 dt in ..``.

    ``rhs`` is a string, or a function of the interval index for right-hand
    sides that depend on absolute time.
    """
    lines = [f"{indent}let {name}0 = {y0} in"]
    for k in range(1, steps + 1):
        f = rhs(k - 1) if callable(rhs) else rhs
        lines.append(f"{indent}let {name}{k} = solve {f} {name}{k - 1} {num(dt)} in")
    return lines


def _lv_traj(c: str, steps: int, dt: float) -> str:
    lines = [f"let traj = lam th: Real{c}.", "  let f = ode th in"]
    lines += _fold("f", _tuple(num(v) for v in LV_Y0), steps, dt)
    lines.append("  " + _tuple(f"y{k}" for k in range(steps + 1)) + " in")
    return "\n".join(lines)


def _grid(steps, dt):
    return [round(k * dt, 12) for k in range(steps + 1)]


# ---------------------------------------------------------------------------
# A: sensitivities two ways


def sensitivity_diff_of_solve(theta: float = TRUE_THETA, horizon: float = 10.0,
                              dt: float = 0.1) -> str:
    """Differentiate the folded ODE solution with respect to ``th``."""
    n = round(horizon / dt)
    rows = _tuple(_tuple([num(x), f"s.{k + 1}.1", f"s.{k + 1}.2"])
                  for k, x in enumerate(_grid(n, dt)))
    return "\n".join([
        "# Sensitivity of the Lotka-Volterra solution to the prey growth rate,",
        "# by differentiating the solution itself.",
        "# Rows: time, prey sensitivity, predator sensitivity.",
        f"let ode = {lv_ode('A')} in",
        _lv_traj("A", n, dt),
        f"let s = diff1A traj {num(theta)} in",
        rows,
        "",
    ])


def sensitivity_augmented(theta: float = TRUE_THETA, horizon: float = 10.0,
                          dt: float = 0.1) -> str:
    """Solve the ODE together with its sensitivity equation

        ds/dx = (df/dy) s + df/dth,

    where both derivatives of the right-hand side come from ``diff``.
    """
    n = round(horizon / dt)
    rows = _tuple(_tuple([num(x), f"z{k}.2.1", f"z{k}.2.2"])
                  for k, x in enumerate(_grid(n, dt)))
    lines = [
        "# Sensitivity of the Lotka-Volterra solution to the prey growth rate,",
        "# by solving the ODE augmented with its sensitivity equation.",
        "# Rows: time, prey sensitivity, predator sensitivity.",
        f"let ode = {lv_ode('A')} in",
        f"let th = {num(theta)} in",
        "let z = lam (x, ys): (RealN, ((RealA, RealA), (RealA, RealA))).",
        "  let y = ys.1 in",
        "  let s = ys.2 in",
        "  let dy = diffA (lam v: (RealA, RealA). ode th (x, v)) y s in",
        "  let dth = diff1A (lam p: RealA. ode p (x, y)) th in",
        "  (ode th (x, y), (dy.1 + dth.1, dy.2 + dth.2)) in",
    ]
    y0 = _tuple([_tuple(num(v) for v in LV_Y0), "(0.0, 0.0)"])
    lines += _fold("z", y0, n, dt, name="z", indent="")
    lines += [rows, ""]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# B: random ODE dy/dx = sin(w x) - y


def rode(points: int = RODE_POINTS, dt: float = RODE_DT, y0: float = RODE_Y0) -> str:
    """Distribution of solution traces on ``dt, 2 dt, ..`` and of the driving
    Wiener realization at the same times."""
    lines = [
        "# Random ODE dy/dx = sin(w x) - y driven by a Wiener realization w.",
        f"# Value: (y at {num(dt)}, .., {num(points * dt)}), (w at the same times).",
        "let rode = lam t: ().",
        "  let w = assume Wiener() in",
        "  let z = lam k: RealN. lam (x, y): (RealN, RealA). sin(w (x + k)) - y in",
    ]
    lines += _fold(lambda k: f"(z {num(round(k * dt, 12))})", num(y0), points, dt)
    ys = _tuple(f"y{k}" for k in range(1, points + 1))
    ws = _tuple(f"w {num(round(k * dt, 12))}" for k in range(1, points + 1))
    lines += [f"  ({ys},", f"   {ws})", "in infer rode", ""]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# C: parameter estimation with sensitivities


def lv_data(theta: float = TRUE_THETA, points: int = DATA_POINTS, dt: float = DATA_DT,
            noise_sd: float = NOISE_SD) -> str:
    """Noisy prey observations at ``0, dt, ..``; run with ``--allow-random``."""
    steps = points - 1
    obs = _tuple(f"ys.{k + 1}.1 + assume Gaussian(0.0, {num(noise_sd)})" for k in range(points))
    return "\n".join([
        "# Synthetic prey observations from the Lotka-Volterra model.",
        f"let ode = {lv_ode('P')} in",
        _lv_traj("P", steps, dt),
        f"let ys = traj {num(theta)} in",
        obs,
        "",
    ])


def lv_estimation(data, dt: float = DATA_DT) -> str:
    """Posterior over (th, prey sensitivity trace) given prey observations."""
    points = len(data)
    steps = points - 1
    lines = [
        "# Posterior of the prey growth rate th and of the sensitivity of the",
        "# prey trace to th, given noisy prey observations.",
        f"let ode = {lv_ode('P')} in",
        _lv_traj("P", steps, dt),
        "let data = " + _tuple(num(v) for v in data) + " in",
        "let model = lam t: ().",
        "  let th = assume Gaussian(1.0, 1.0) in",
        "  let sigma = assume Beta(2.0, 2.0) in",
        "  let ys = traj th in",
    ]
    for k in range(points):
        lines.append(f"  observe data.{k + 1} from Gaussian(ys.{k + 1}.1, sigma);")
    prey = _tuple(f"zs.{k + 1}.1" for k in range(points))
    lines += [
        f"  let f = lam x: RealP. let zs = traj x in {prey} in",
        "  (th, diff1P f th)",
        "in infer model",
        "",
    ]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Drivers


def run_source(text: str, rt: Runtime, allow_random: bool = False):
    """Type-check and evaluate; returns the native value.  Inferred
    distributions are materialized with ``rt.particles`` particles."""
    t = parse(text)
    check_program(t, allow_random=allow_random)
    ev = Evaluator(rt)
    v, lw = ev.run_term(t, toplevel_stream(rt.seed))
    if type(v) is InferV:
        return materialize(ev.readback(v.model), rt, particles=rt.particles)
    return v


def synthetic_data(seed: int, rt: "Runtime | None" = None) -> tuple:
    rt = rt or Runtime()
    data_rt = Runtime(ode=rt.ode, seed=derive(seed, "data"))
    return run_source(lv_data(), data_rt, allow_random=True)


def estimate(seed: int, particles: int, rt: "Runtime | None" = None):
    """Data generation and inference for one seed.

    Returns (data, posterior) with posterior values ``(th, sensitivities)``.
    """
    rt = rt or Runtime()
    data = synthetic_data(seed, rt)
    run_rt = Runtime(ode=rt.ode, particles=particles, seed=seed, workers=rt.workers)
    return data, run_source(lv_estimation(data), run_rt)


def posterior_theta_mean(post: EmpiricalDist) -> float:
    return post.mean(lambda v: v.elems[0].r)


def bundled() -> dict:
    """File name -> text of every bundled program."""
    return {
        "sensitivity_diff_of_solve.dppl": sensitivity_diff_of_solve(),
        "sensitivity_augmented.dppl": sensitivity_augmented(),
        "rode.dppl": rode(),
        "lotka_volterra_data.dppl": lv_data(),
        "lotka_volterra_estimation.dppl": lv_estimation(synthetic_data(0)),
    }


def write_bundled(directory: Path = PROGRAM_DIR) -> list:
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for name, text in bundled().items():
        path = directory / name
        path.write_text(text)
        out.append(path)
    return out


if __name__ == "__main__":
    for p in write_bundled(Path(sys.argv[1]) if len(sys.argv) > 1 else PROGRAM_DIR):
        print(p)
