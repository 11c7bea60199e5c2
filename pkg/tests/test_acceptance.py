"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines; every
tolerance is fixed here, nothing is calibrated at run time.
"""

import math
import time
import warnings

import numpy as np
import pytest

from lambrecon.cli import main
from lambrecon.propagate import (
    PropagationConfig,
    cn_propagate,
    lamb_protocol,
    phase_kick,
    window_fidelity,
)
from lambrecon.prefactor import (
    family_free,
    family_gaussian,
    family_hydrogen,
    family_well,
)
from lambrecon.reconstruct import (
    Grid1D,
    ReconstructionConfig,
    clip_domain,
    current_density,
    default_grid,
    phase_at,
    reconstruct,
)
from lambrecon.verify import check_recon_condition, norm, residual_split

from oracles import simpson_phase


def _report(num, name, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num:02d} [{name}]: {status} ({detail})")
    assert ok, f"criterion {num}: {name}: {detail}"


FAMILIES = {
    "free": family_free,
    "gaussian": family_gaussian,
    "well": family_well,
    "hydrogen": family_hydrogen,
}


def test_01_harmonic_oscillator_recovery():
    t0 = time.perf_counter()
    grid = Grid1D(-3.0, 3.0, 1001)
    st = reconstruct(family_gaussian(), ReconstructionConfig(C=0.0, grid=grid, E=0.5))
    xs = grid.points()
    dev = float(np.max(np.abs(st.V - xs * xs / 2.0)))
    elapsed = time.perf_counter() - t0
    _report(1, "C=0 harmonic oscillator", dev <= 1e-10 and elapsed < 1.0,
            f"max|V - x^2/2| = {dev:.3e} <= 1e-10, runtime {elapsed:.3f}s < 1s")


def test_02_infinite_well_recovery():
    grid = Grid1D(-0.9, 0.9, 1001)
    st = reconstruct(family_well(), ReconstructionConfig(C=0.0, grid=grid))
    dev = float(np.max(np.abs(st.V)))
    _report(2, "C=0 infinite well", dev <= 1e-10, f"max|V| = {dev:.3e} <= 1e-10")


def test_03_hydrogen_recovery():
    grid = Grid1D(0.1, 5.0, 1001)
    st = reconstruct(family_hydrogen(), ReconstructionConfig(C=0.0, grid=grid, E=-0.5))
    rs = grid.points()
    dev = float(np.max(np.abs(st.V + 1.0 / rs)))
    _report(3, "C=0 Coulomb potential", dev <= 1e-10, f"max|V + 1/r| = {dev:.3e} <= 1e-10")


def test_04_free_particle_consistency():
    worst_v = 0.0
    worst_psi = 0.0
    for c in (0.5, 1.0, 2.0):
        grid = Grid1D(0.0, 2.0 * math.pi, 629)
        st = reconstruct(family_free(), ReconstructionConfig(C=c, grid=grid))
        assert st.E == c * c / 2.0
        xs = grid.points()
        worst_v = max(worst_v, float(np.max(np.abs(st.V))))
        worst_psi = max(
            worst_psi,
            float(np.max(np.abs(st.psi.real - np.cos(c * xs)))),
            float(np.max(np.abs(st.psi.imag - np.sin(c * xs)))),
        )
    _report(4, "free particle, E=C^2/2", worst_v <= 1e-12 and worst_psi <= 1e-12,
            f"max|V| = {worst_v:.3e} <= 1e-12, max|psi - e^(iCx)| = {worst_psi:.3e} <= 1e-12")


def test_05_deformed_potentials_closed_forms():
    def ref_gaussian(x, c):
        return x * x / 2.0 - c * c * math.pi * np.exp(2.0 * x * x) / 2.0

    def ref_well(x, c):
        return -c * c / (2.0 * np.cos(math.pi * x / 2.0) ** 4)

    def ref_hydrogen(r, c):
        return -1.0 / r - c * c * math.pi ** 2 * np.exp(4.0 * r) / (2.0 * r ** 4)

    worst = 0.0
    for name, ref in (("gaussian", ref_gaussian), ("well", ref_well), ("hydrogen", ref_hydrogen)):
        pref = FAMILIES[name]()
        for c in (0.1, 0.5):
            grid = default_grid(pref, n=2001)
            st = reconstruct(pref, ReconstructionConfig(C=c, grid=grid))
            v_ref = ref(grid.points(), c)
            rel = float(np.max(np.abs(st.V - v_ref) / np.maximum(1.0, np.abs(v_ref))))
            worst = max(worst, rel)
    _report(5, "deformed potentials vs closed forms", worst <= 1e-9,
            f"max relative deviation = {worst:.3e} <= 1e-9 (default clipped grids, C in {{0.1, 0.5}})")


def test_06_schrodinger_residuals():
    worst = 0.0
    for name, ctor in FAMILIES.items():
        pref = ctor()
        for c in (0.0, 0.1, 0.5):
            grid = default_grid(pref, n=1001)
            st = reconstruct(pref, ReconstructionConfig(C=c, grid=grid))
            ra, rb = residual_split(st, st.E, mode="analytic")
            worst = max(worst, ra, rb)
    maxima = []
    for n in (501, 1001, 2001, 4001):
        grid = Grid1D(-1.5, 1.5, n)
        st = reconstruct(family_gaussian(), ReconstructionConfig(C=0.1, grid=grid))
        maxima.append(max(residual_split(st, st.E, mode="fd")))
    ratios = [maxima[i] / maxima[i + 1] for i in range(3)]
    order_ok = all(3.5 <= r <= 4.5 for r in ratios)
    _report(6, "Schrodinger residuals", worst <= 1e-10 and order_ok,
            f"analytic max = {worst:.3e} <= 1e-10; fd ratios {[f'{r:.2f}' for r in ratios]} in [3.5, 4.5]")


def test_07_current_constancy():
    worst_fd = 0.0
    worst_an = 0.0
    for name, ctor in FAMILIES.items():
        pref = ctor()
        grid = default_grid(pref, n=4001)
        st = reconstruct(pref, ReconstructionConfig(C=0.3, grid=grid))
        j_fd = current_density(st, mode="fd")
        worst_fd = max(worst_fd, float(np.max(np.abs(j_fd[2:-2] - 0.3))))
        j_an = current_density(st, mode="analytic")
        worst_an = max(worst_an, float(np.max(np.abs(j_an - 0.3))))
    _report(7, "current constancy", worst_fd <= 1e-5 and worst_an <= 1e-13,
            f"fd max|j - C| = {worst_fd:.3e} <= 1e-5 at n=4001; analytic {worst_an:.3e} <= 1e-13")


def test_08_phase_integral_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20260810)
    worst = 0.0
    for name, ctor in FAMILIES.items():
        pref = ctor()
        lo, hi = clip_domain(pref)
        width = hi - lo
        count = 0
        while count < 20:
            x0, x = np.sort(rng.uniform(lo, hi, 2))
            if x - x0 < 0.1 * width:
                continue  # keep |S| well away from zero for a relative check
            got = phase_at(pref, 0.3, float(x0), float(x))
            ref = simpson_phase(pref, 0.3, float(x0), float(x), panels=1_000_000)
            worst = max(worst, abs(got - ref) / abs(ref))
            count += 1
    elapsed = time.perf_counter() - t0
    _report(8, "phase integral vs 1e6-panel Simpson", worst <= 1e-8 and elapsed < 10.0,
            f"max rel err = {worst:.3e} <= 1e-8 over 4x20 pairs, runtime {elapsed:.2f}s < 10s")


def test_09_normalization():
    st = reconstruct(
        family_gaussian(), ReconstructionConfig(C=0.0, grid=Grid1D(-6.0, 6.0, 8001), clip=0.0)
    )
    gauss_norm = norm(st)
    st = reconstruct(
        family_hydrogen(), ReconstructionConfig(C=0.0, grid=Grid1D(0.02, 15.0, 8001), clip=0.0)
    )
    hyd_norm = norm(st)
    ok = abs(gauss_norm - 1.0) <= 1e-8 and abs(hyd_norm - 1.0) <= 1e-4
    _report(9, "normalization", ok,
            f"gaussian {gauss_norm:.10f} = 1 +- 1e-8; hydrogen(3D) {hyd_norm:.6f} = 1 +- 1e-4")


def test_10_protocol_kick_and_catch():
    worst_kick = 0.0
    for name, ctor in FAMILIES.items():
        pref = ctor()
        for c in (0.0, 0.1, 0.5):
            grid = default_grid(pref, n=801)
            st = reconstruct(pref, ReconstructionConfig(C=c, grid=grid))
            kicked = phase_kick(st.R.astype(complex), st.S)
            worst_kick = max(worst_kick, float(np.max(np.abs(kicked - st.psi))))

    # step 2: the caught amplitude is stationary under the C=0 potential, T=0.5
    from lambrecon.reconstruct import potential_line

    well = family_well()
    grid = Grid1D(-1.0, 1.0, 2001)  # walls at the amplitude's own zeros
    xs = grid.points()
    psi = well.eval_many(xs)[0].astype(complex)
    v1 = potential_line(well, 0.0, well.default_E, xs)
    _, rep_w = cn_propagate(psi, v1, grid, PropagationConfig(dt=1e-3, steps=500))

    gauss = family_gaussian()
    grid = Grid1D(-8.0, 8.0, 2049)
    xs = grid.points()
    psi = gauss.eval_many(xs)[0].astype(complex)
    v1 = potential_line(gauss, 0.0, 0.5, xs)
    _, rep_g = cn_propagate(psi, v1, grid, PropagationConfig(dt=1e-3, steps=500))

    ok = worst_kick <= 1e-15 and rep_w.fidelity_t[-1] >= 0.9999 and rep_g.fidelity_t[-1] >= 0.9999
    _report(10, "pulse-kick protocol", ok,
            f"kick error {worst_kick:.2e} <= 1e-15 (all families x C); step-2 fidelity "
            f"well {rep_w.fidelity_t[-1]:.6f}, gaussian {rep_g.fidelity_t[-1]:.6f} >= 0.9999 over T=0.5")


def test_11_confined_scattering_state_stationarity():
    grid = Grid1D(-0.95, 0.95, 4001)
    rcfg = ReconstructionConfig(C=0.2, grid=grid)
    pcfg = PropagationConfig(dt=1e-5, steps=2000)  # T = 0.02
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = lamb_protocol(family_well(), rcfg, pcfg)
    fid = window_fidelity(res.state.psi, res.psi_final, grid, (-0.8, 0.8))
    _report(11, "confined scattering state", fid >= 0.99,
            f"interior-window fidelity {fid:.6f} >= 0.99 (well, C=0.2, T=0.02)")


def test_12_reconstructability_detector():
    vals = []
    grid = Grid1D(-2.0, 2.0, 10001)
    st = reconstruct(family_gaussian(), ReconstructionConfig(C=0.1, grid=grid))
    vals.append(check_recon_condition(st.psi.real, st.psi.imag, grid))
    grid = Grid1D(-0.9, 0.9, 8001)
    st = reconstruct(family_well(), ReconstructionConfig(C=0.2, grid=grid))
    vals.append(check_recon_condition(st.psi.real, st.psi.imag, grid))
    constructed = max(vals)

    grid = Grid1D(-3.0, 3.0, 6001)
    xs = grid.points()
    counter = check_recon_condition(
        np.exp(-xs * xs / 2.0), xs * np.exp(-xs * xs / 2.0), grid
    )
    ok = constructed <= 1e-6 and counter >= 0.1
    _report(12, "reconstructability detector", ok,
            f"constructed max {constructed:.3e} <= 1e-6; counterexample {counter:.3f} >= 0.1")


def test_13_crank_nicolson_unitarity():
    grid = Grid1D(0.0, 1.0, 1001)
    xs = grid.points()
    psi = np.sin(np.pi * xs).astype(complex)
    _, rep = cn_propagate(psi, np.zeros(grid.n), grid, PropagationConfig(dt=1e-4, steps=10000))
    drift = float(np.max(np.abs(rep.norm_t / rep.norm_t[0] - 1.0)))
    _report(13, "Crank-Nicolson unitarity", drift <= 1e-12,
            f"norm drift {drift:.3e} <= 1e-12 over 10^4 steps")


def test_14_cli_determinism(tmp_path):
    args = ["sweep", "--family", "well", "--C-list", "0,0.25,0.5"]
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    code1 = main(args + ["--out-dir", str(out1)])
    code2 = main(args + ["--out-dir", str(out2)])
    names1 = sorted(p.name for p in out1.iterdir())
    names2 = sorted(p.name for p in out2.iterdir())
    identical = (
        code1 == code2 == 0
        and names1 == names2
        and all((out1 / n).read_bytes() == (out2 / n).read_bytes() for n in names1)
    )
    _report(14, "CLI determinism", identical,
            f"two sweep runs, {len(names1)} files each (incl. PNG), byte-identical")
