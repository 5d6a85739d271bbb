import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robinms import (
    FULL,
    PBS,
    POL,
    ConfigurationError,
    ContractViolation,
    FieldSpec,
    MethodPreset,
    PermeabilityField,
    build_decomposition,
    build_grid,
    generate_field,
    quarter_five_spot,
    slab_flux,
    slab_pressure,
    solve_mrcm,
)
from robinms.mrcm import error_norms, fine_reference_solve
from robinms.scenarios import single_barrier, single_fracture

PRESETS = [MethodPreset.mmmfem(), MethodPreset.mhm(), MethodPreset.mrcm(1.0), MethodPreset.amrcm()]


def _homog(n):
    g = build_grid(n, n)
    return g, generate_field(FieldSpec(1.0, 1.0, 1.0), g)


def test_interface_system_sizes():
    g, f = _homog(12)
    dec, sk = build_decomposition(g, 2, 2)
    ms = solve_mrcm(g, dec, sk, f, slab_flux(g), MethodPreset.mrcm(1.0), POL)
    assert ms.spaces.size == 16
    dec, sk = build_decomposition(g, 1, 1)
    ms = solve_mrcm(g, dec, sk, f, slab_flux(g), MethodPreset.mrcm(1.0), POL)
    assert ms.spaces.size == 0


def test_preset_names():
    assert MethodPreset.from_name("MMMFEM").alpha_small == MethodPreset.mmmfem().alpha_small
    assert MethodPreset.from_name("aMRCM").label.startswith("aMRCM")
    with pytest.raises(ConfigurationError):
        MethodPreset.from_name("FEM")


@given(st.sampled_from(PRESETS), st.sampled_from([POL, PBS]), st.sampled_from([(1, 1), (2, 2), (3, 2), (4, 4)]),
       st.booleans())
def test_homogeneous_is_exact(preset, scheme, parts, pressure_bc):
    g, f = _homog(24)
    dec, sk = build_decomposition(g, *parts)
    bs = slab_pressure(g) if pressure_bc else slab_flux(g)
    e = error_norms(solve_mrcm(g, dec, sk, f, bs, preset, scheme), fine_reference_solve(g, f, bs))
    assert e["pressure"] < 1e-10 and e["flux"] < 1e-10


@given(st.integers(0, 2**31), st.sampled_from([1e-6, 1.0, 1e6]))
def test_full_spaces_reproduce_fine_solution(seed, alpha):
    g = build_grid(12, 12)
    f = PermeabilityField(g, 10.0 ** np.random.default_rng(seed).uniform(-4, 4, g.shape))
    dec, sk = build_decomposition(g, 2, 3)
    bs = slab_flux(g)
    e = error_norms(solve_mrcm(g, dec, sk, f, bs, MethodPreset.mrcm(alpha), FULL), fine_reference_solve(g, f, bs))
    assert e["pressure"] < 1e-8 and e["flux"] < 1e-8


def _fractured():
    g = build_grid(40, 40)
    f = generate_field(single_fracture(1e6), g)
    return g, f, *build_decomposition(g, 4, 4)


def test_local_conservation_and_mass_balance():
    g, f, dec, sk = _fractured()
    for bs in (slab_flux(g), quarter_five_spot(g)):
        for preset in PRESETS:
            ms = solve_mrcm(g, dec, sk, f, bs, preset, PBS)
            scale = np.abs(ms.flux_minus.ux).max() * g.hy
            assert np.abs(ms.divergence_residual()).max() < 1e-9 * scale


def test_weak_continuity_on_linear_spaces():
    # with polynomial spaces the flux jump is orthogonal to the linear functions
    g, f, dec, sk = _fractured()
    ms = solve_mrcm(g, dec, sk, f, slab_flux(g), MethodPreset.mrcm(1.0), POL)
    for itf in sk.interfaces:
        fx = itf.faces()
        arr = "ux" if itf.normal == "x" else "uy"
        jump = getattr(ms.flux_minus, arr)[fx] - getattr(ms.flux_plus, arr)[fx]
        basis = ms.spaces.flux[itf.index].basis
        scale = np.abs(getattr(ms.flux_minus, arr)).max()
        assert np.abs(basis.T @ jump).max() < 1e-8 * scale * itf.m


def test_mmmfem_is_small_alpha_limit():
    g, f, dec, sk = _fractured()
    bs = slab_flux(g)
    a = solve_mrcm(g, dec, sk, f, bs, MethodPreset.mmmfem(), POL)
    b = solve_mrcm(g, dec, sk, f, bs, MethodPreset.mrcm(1e-6), POL)
    c = solve_mrcm(g, dec, sk, f, bs, MethodPreset.mrcm(1e-8), POL)
    assert np.array_equal(a.pressure, b.pressure)
    assert np.allclose(b.pressure, c.pressure, atol=1e-3 * np.abs(c.pressure).max())


def test_fracture_plateau_needs_physics_spaces():
    g = build_grid(40, 40)
    f = generate_field(single_fracture(1e8), g)
    dec, sk = build_decomposition(g, 2, 2)
    bs = slab_flux(g)
    ref = fine_reference_solve(g, f, bs)
    row = 19  # y = 0.4875
    cols = np.flatnonzero(f.values[row] > 1)
    assert np.ptp(ref.pressure[row, cols]) < 1e-6
    errs = {s: np.abs(solve_mrcm(g, dec, sk, f, bs, MethodPreset.mmmfem(), s).pressure[row] - ref.pressure[row]).max()
            for s in (POL, PBS)}
    assert errs[PBS] < 0.2 * errs[POL]


def test_barrier_flux_needs_physics_spaces():
    g = build_grid(40, 40)
    f = generate_field(single_barrier(1e8), g)
    dec, sk = build_decomposition(g, 2, 2)
    bs = slab_flux(g)
    ref = fine_reference_solve(g, f, bs)
    rows = np.flatnonzero(f.values[:, 20] < 1)
    assert np.abs(ref.flux_minus.ux[rows, 20]).max() < 1e-6
    out = {}
    for s in (POL, PBS):
        ms = solve_mrcm(g, dec, sk, f, bs, MethodPreset.mhm(), s)
        out[s] = np.abs(ms.flux_minus.ux[rows, 20]).max()
    assert out[PBS] < 1e-6 < out[POL]


def test_error_norm_values():
    g = build_grid(4, 4)
    f = generate_field(FieldSpec(1.0, 1.0, 1.0), g)
    bs = slab_pressure(g)
    ref = fine_reference_solve(g, f, bs)
    e = error_norms(ref, ref, saturation=(np.ones(3), np.ones(3)))
    assert e == {"pressure": 0.0, "flux": 0.0, "saturation": 0.0}
    double = fine_reference_solve(g, f, slab_pressure(g, 2.0, 0.0))
    e = error_norms(double, ref)
    assert e["pressure"] == pytest.approx(1.0) and e["flux"] == pytest.approx(1.0)
    # one cell perturbed by d: error = d / ||p||
    bumped = fine_reference_solve(g, f, bs)
    bumped.pressure = ref.pressure.copy()
    bumped.pressure[1, 2] += 0.3
    want = 0.3 / np.sqrt(np.sum(ref.pressure**2))
    assert error_norms(bumped, ref)["pressure"] == pytest.approx(want)
    s = np.array([0.5, 0.5, 0.0, 0.0])
    assert error_norms(ref, ref, saturation=(s + [0.1, 0, 0, 0], s))["saturation"] == pytest.approx(0.1)


def test_error_norm_contract():
    g = build_grid(4, 4)
    f = generate_field(FieldSpec(1.0, 1.0, 1.0), g)
    a = fine_reference_solve(g, f, slab_flux(g))
    g2 = build_grid(4, 4, 2.0, 1.0)
    b = fine_reference_solve(g2, generate_field(FieldSpec(1.0, 1.0, 1.0), g2), slab_flux(g2))
    with pytest.raises(ContractViolation):
        error_norms(a, b)
