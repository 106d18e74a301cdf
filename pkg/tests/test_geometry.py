import numpy as np
import pytest

from lagmhd.errors import ConstructionFailedError
from lagmhd.fields import VectorField
from lagmhd.geometry import (
    FlowState,
    cofactor_matrices,
    construct_initial_map,
    determinant_values,
    evaluate_at_flow,
    jacobian_determinant,
    make_trig_evaluator,
    metric_graded,
    pushforward_fields,
)
from lagmhd.grid import Grid
from lagmhd.initial_data import (
    InitialDataSpec,
    ShearMode,
    build_flow_state,
    default_spec,
    scaled_spec,
)
from lagmhd.spectral import dealias_spec, gradient_values, leray_project

from conftest import mesh, random_band_limited


def shear_state(grid, eps=0.1):
    """Y = (0, eps sin y1, 0): the single-shear probe."""
    y1 = mesh(grid)[0]
    vals = np.zeros((grid.dim,) + grid.shape)
    vals[1] = eps * np.sin(y1)
    return VectorField.from_values(grid, vals)


# -- cofactor expansion ------------------------------------------------------


def test_cofactor_identity_at_rest(grid3):
    cof = cofactor_matrices(VectorField.zeros(grid3))
    eye = np.zeros((3, 3) + grid3.shape)
    for i in range(3):
        eye[i, i] = 1.0
    assert np.abs(cof.A.values - eye).max() == 0.0
    assert np.abs(cof.B1.values).max() == 0.0
    assert np.abs(cof.B2.values).max() == 0.0


def test_cofactor_single_shear_closed_form(grid3):
    y = shear_state(grid3, eps=0.1)
    cof = cofactor_matrices(y)
    grad = gradient_values(y.spec, grid3)
    assert np.abs(cof.B2.values).max() < 1e-14
    # A = I - (grad Y)^T for a divergence-free shear
    expect = -np.swapaxes(grad, 0, 1).copy()
    for i in range(3):
        expect[i, i] += 1.0
    assert np.abs(cof.A.values - expect).max() < 1e-12
    # cross-check against the dense inverse-transpose (det = 1 for the shear)
    m = np.moveaxis(grad, (0, 1), (-2, -1)).copy()
    m[..., 0, 0] += 1.0
    m[..., 1, 1] += 1.0
    m[..., 2, 2] += 1.0
    inv_t = np.swapaxes(np.linalg.inv(m), -2, -1)
    got = np.moveaxis(cof.A.values, (0, 1), (-2, -1))
    assert np.abs(got - inv_t).max() < 1e-12


def test_cofactor_quadratic_entry_sign(grid3):
    # d2 Y^3 and d3 Y^2 both nonzero: B2[0,0] = -d2Y^3 d3Y^2 there
    _, y2, y3 = mesh(grid3)
    a, c = 0.2, 0.3
    vals = np.zeros((3,) + grid3.shape)
    vals[2] = a * np.sin(y2)
    vals[1] = c * np.sin(y3)
    cof = cofactor_matrices(VectorField.from_values(grid3, vals))
    expect = -a * np.cos(y2) * c * np.cos(y3)
    assert np.abs(cof.B2.values[0, 0] - expect).max() < 1e-12


def test_cofactor_matches_brute_force_adjugate(grid3, rng):
    y = random_band_limited(grid3, rng, rank=1, kmax=2, scale=0.2)
    cof = cofactor_matrices(y)
    grad = gradient_values(y.spec, grid3)
    m = np.moveaxis(grad, (0, 1), (-2, -1)).copy()
    for i in range(3):
        m[..., i, i] += 1.0
    adj_t = np.linalg.inv(m) * np.linalg.det(m)[..., None, None]
    adj_t = np.swapaxes(adj_t, -2, -1)
    got = np.moveaxis(cof.A.values, (0, 1), (-2, -1))
    assert np.abs(got - adj_t).max() < 1e-11


def test_cofactor_inverse_when_volume_preserving(grid3):
    # exact composition of shears: det(I + grad Y) = 1, so A^T (I + grad Y) = I
    grid = Grid((32, 32, 32), (2 * np.pi,) * 3)
    state = build_flow_state(grid, scaled_spec(default_spec(3, None), 0.05))
    cof = cofactor_matrices(state.Y)
    grad = gradient_values(state.Y.spec, grid)
    m = grad.copy()
    for i in range(3):
        m[i, i] += 1.0
    atm = np.einsum("ji...,jm...->im...", cof.A.values, m)
    det_defect = np.abs(determinant_values(grad) - 1.0).max()
    # A^T (I + grad Y) = det * I exactly; the residual from I is the det defect
    for i in range(3):
        atm[i, i] -= 1.0
    assert np.abs(atm).max() < max(1e-10, 10.0 * det_defect)
    assert det_defect < 1e-8


def test_b_decomposition_sums_to_a(grid3, rng):
    y = random_band_limited(grid3, rng, rank=1, kmax=3, scale=0.5)
    cof = cofactor_matrices(y)
    eye = np.zeros((3, 3) + grid3.shape)
    for i in range(3):
        eye[i, i] = 1.0
    resid = cof.A.values - (eye + cof.B1.values + cof.B2.values)
    assert np.abs(resid).max() == 0.0  # identity by construction


# -- determinant -------------------------------------------------------------


def test_determinant_at_rest_and_shears(grid3):
    assert np.abs(jacobian_determinant(VectorField.zeros(grid3)).values - 1).max() == 0
    y1, y2, _ = mesh(grid3)
    vals = np.zeros((3,) + grid3.shape)
    vals[0] = 0.3 * np.sin(y2)  # nilpotent gradient
    det = jacobian_determinant(VectorField.from_values(grid3, vals)).values
    assert np.abs(det - 1.0).max() < 1e-13
    vals = np.zeros((3,) + grid3.shape)
    vals[0] = 0.3 * np.sin(y1)  # deliberately non-volume-preserving probe
    det = jacobian_determinant(VectorField.from_values(grid3, vals)).values
    assert np.abs(det - (1.0 + 0.3 * np.cos(y1))).max() < 1e-12


def test_determinant_brute_force_oracle(grid3, rng):
    y = random_band_limited(grid3, rng, rank=1, kmax=2, scale=0.3)
    grad = gradient_values(y.spec, grid3)
    m = np.moveaxis(grad, (0, 1), (-2, -1)).copy()
    for i in range(3):
        m[..., i, i] += 1.0
    expect = np.linalg.det(m)
    got = determinant_values(grad)
    assert np.abs(got - expect).max() < 1e-12


# -- graded metric pieces -----------------------------------------------------


def test_graded_zero_state(grid3):
    for g in metric_graded(VectorField.zeros(grid3)):
        assert np.abs(g.values).max() == 0.0


def test_graded_sum_reproduces_metric_defect(grid3, rng):
    y = random_band_limited(grid3, rng, rank=1, kmax=3, scale=0.4)
    cof = cofactor_matrices(y)
    ata = np.einsum("ji...,jm...->im...", cof.A.values, cof.A.values)
    for i in range(3):
        ata[i, i] -= 1.0
    assert np.abs(cof.metric_defect - ata).max() < 1e-12


@pytest.mark.parametrize("s", [0.5, 0.25])
def test_graded_homogeneity(grid3, rng, s):
    y = random_band_limited(grid3, rng, rank=1, kmax=2, scale=0.3)
    base = metric_graded(y)
    scaled = metric_graded(VectorField.from_values(grid3, s * y.values))
    for d, (g_base, g_scaled) in enumerate(zip(base, scaled), start=1):
        ref = np.abs(g_base.values).max() * s**d
        assert np.abs(g_scaled.values - s**d * g_base.values).max() < 1e-8 * ref


def test_graded_single_shear_structure(grid3):
    y = shear_state(grid3, eps=0.2)
    g1, g2, g3, g4 = metric_graded(y)
    cof = cofactor_matrices(y)
    b1 = cof.B1.values
    assert np.abs(g1.values - (b1 + np.swapaxes(b1, 0, 1))).max() < 1e-14
    b1tb1 = np.einsum("ji...,jm...->im...", b1, b1)
    assert np.abs(g2.values - b1tb1).max() < 1e-14
    assert np.abs(g3.values).max() < 1e-14
    assert np.abs(g4.values).max() < 1e-14


def test_graded_2d_has_two_pieces(grid2, rng):
    y = random_band_limited(grid2, rng, rank=1, kmax=3, scale=0.3)
    graded = metric_graded(y)
    assert len(graded) == 2
    cof = cofactor_matrices(y)
    assert np.abs(cof.B2.values).max() == 0.0
    ata = np.einsum("ji...,jm...->im...", cof.A.values, cof.A.values)
    for i in range(2):
        ata[i, i] -= 1.0
    assert np.abs(cof.metric_defect - ata).max() < 1e-12


# -- pushforward and trig evaluation ------------------------------------------


def test_pushforward_zero_state(grid3):
    sample = pushforward_fields(FlowState.zeros(grid3))
    assert np.abs(sample.u.values).max() == 0.0
    b = sample.b.values
    assert np.abs(b[0] - 1.0).max() < 1e-15 and np.abs(b[1:]).max() < 1e-15
    coords = np.stack(np.broadcast_arrays(*grid3.coords))
    assert np.abs(sample.positions - coords).max() == 0.0


def test_pushforward_b_is_divergence_compatible():
    # div_x b = 0 restated through the cofactor rows: div_y(A^T (e1 + d1 Y)) = 0
    grid = Grid((32, 32, 32), (2 * np.pi,) * 3)
    state = build_flow_state(grid, scaled_spec(default_spec(3, None), 0.02))
    sample = pushforward_fields(state)
    cof = cofactor_matrices(state.Y)
    atb = np.einsum("ji...,j...->i...", cof.A.values, sample.b.values)
    spec = grid.fft(atb)
    div = np.zeros(grid.shape, dtype=complex)
    for j in range(3):
        div += 1j * grid.k_axes[j] * spec[j]
    # exact in the continuum; the grid residue is cubic product aliasing
    assert np.abs(div).max() < 2e-9


def test_evaluate_at_flow_single_mode(grid3):
    y1 = mesh(grid3)[0]
    from lagmhd.fields import ScalarField

    f = ScalarField.from_values(grid3, np.sin(y1))
    val = evaluate_at_flow(f, np.array([[np.pi / 2, 0.0, 0.0]]))
    assert abs(val[0] - 1.0) < 1e-12
    assert evaluate_at_flow(f, np.empty((0, 3))).shape == (0,)


def test_evaluate_at_flow_reproduces_grid_samples(grid3, rng):
    f = random_band_limited(grid3, rng, rank=0, kmax=4)
    coords = np.stack(np.broadcast_arrays(*grid3.coords))
    pts = np.moveaxis(coords, 0, -1).reshape(-1, 3)
    vals = evaluate_at_flow(f, pts)
    assert np.abs(vals - f.values.ravel()).max() < 1e-12 * np.abs(f.values).max()


def test_evaluate_at_flow_matches_refined_grid(grid3, rng):
    f = random_band_limited(grid3, rng, rank=0, kmax=4)
    fine = Grid((32, 32, 32), grid3.lengths)
    nc = grid3.sizes[0]
    src = (np.fft.fftfreq(nc) * nc).astype(int)
    fi = [src % fine.sizes[d] for d in range(3)]
    spec_f = np.zeros(fine.shape, dtype=complex)
    spec_f[np.ix_(fi[0], fi[1], fi[2])] = f.spec
    refined_vals = fine.ifft(spec_f)
    pts = rng.uniform(0, 2 * np.pi, size=(50, 3))
    idx = np.round(pts / fine.spacings[0]).astype(int) % fine.sizes[0]
    snapped = idx * fine.spacings[0]
    direct = evaluate_at_flow(f, snapped)
    oracle = refined_vals[idx[:, 0], idx[:, 1], idx[:, 2]]
    assert np.abs(direct - oracle).max() < 1e-10 * np.abs(f.values).max()


# -- initial map construction ---------------------------------------------------


def test_initial_map_identity_for_uniform_field(grid3):
    b = np.zeros((3,) + grid3.shape)
    b[0] = 1.0
    result = construct_initial_map(VectorField.from_values(grid3, b), tol=1e-10)
    assert result.residual_e1 < 1e-12
    assert result.residual_det < 1e-12
    assert np.abs(result.displacement.values).max() < 1e-12
    eye = np.zeros((3, 3) + grid3.shape)
    for i in range(3):
        eye[i, i] = 1.0
    assert np.abs(result.a0.values - eye).max() < 1e-12


def _roundtrip_b0(grid, amp):
    """b0 sampled from an exactly volume-preserving map: b0(X0(y)) = d1 X0(y)."""
    spec = InitialDataSpec(
        shear_a=(ShearMode((1, 1), amp=amp, phase=0.3), ShearMode((2, -1), amp=0.5 * amp, phase=1.0)),
        shear_c=(ShearMode((1, 1), amp=0.4 * amp, phase=0.9),),
        velocity=(),
        epsilon0=None,
    )
    state = build_flow_state(grid, spec)
    from lagmhd.initial_data import euler_from_flow

    # the b field of the pushforward is exactly d1 X0 at mapped points
    euler = euler_from_flow(
        FlowState(state.Y, VectorField.zeros(grid), 0.0)
    )
    b_spec = euler.b.spec.copy()
    e1_idx = (0,) + (0,) * grid.dim
    # keep the mean drift exactly e1 and the perturbation exactly solenoidal
    pert = b_spec.copy()
    pert[e1_idx] -= 1.0
    pert = dealias_spec(
        leray_project(VectorField.from_spec(grid, pert)).spec, grid
    )
    pert[e1_idx] += 1.0
    return VectorField.from_spec(grid, pert), state


def test_initial_map_roundtrip_small_perturbation(grid3):
    b0, state = _roundtrip_b0(grid3, amp=1e-3)
    result = construct_initial_map(b0, tol=1e-6)
    assert result.residual_e1 <= 1e-6
    assert result.residual_det <= 1e-6
    # Liouville: det(grad X0) constant along y1 (div b0 = 0)
    grad = gradient_values(result.displacement.spec, grid3)
    det = determinant_values(grad)
    along = det.max(axis=0) - det.min(axis=0)
    assert np.abs(along).max() < 5e-7


def test_initial_map_rejects_nontransversal_field(grid3):
    y1 = mesh(grid3)[0]
    b = np.zeros((3,) + grid3.shape)
    b[0] = 0.6 + 0.61 * np.cos(y1)  # dips below 1/2 (and touches ~0)
    with pytest.raises(ConstructionFailedError):
        construct_initial_map(VectorField.from_values(grid3, b), tol=1e-8)


def test_initial_map_rejects_compressible_field(grid3):
    y1 = mesh(grid3)[0]
    b = np.zeros((3,) + grid3.shape)
    b[0] = 1.0 + 0.1 * np.sin(y1)
    with pytest.raises(ConstructionFailedError):
        construct_initial_map(VectorField.from_values(grid3, b), tol=1e-8)


def test_initial_map_iteration_cap_reports_residual(grid3):
    from lagmhd.errors import NotConvergedError

    b0, _ = _roundtrip_b0(grid3, amp=1e-3)
    with pytest.raises(NotConvergedError) as err:
        construct_initial_map(b0, tol=1e-13, max_iter=1)
    assert err.value.residual is not None and err.value.residual > 0
