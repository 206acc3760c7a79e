import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpm import geometry as geo
from bpm.certify import (
    Condition,
    Lipschitz,
    MonteCarlo,
    Sampled,
    Verdict,
    check_bolzano,
    check_hilbert_cube,
    check_linear_growth,
    check_miranda,
    check_normal_cone,
    check_normal_cone_points,
    check_ode_inward,
    check_pairing_sign,
    check_ray_condition,
    compute_ell,
    ell_by_subdivision,
    smallest_singular_value,
)
from bpm.exprlang import MapSpec
from bpm.geometry import BallDomain, BoxDomain
from bpm.pairing import Space, norm
from bpm.solve import grid_oracle

UNIT_BALL = BallDomain([0, 0], 1)
L_S = np.array([[-2.0, 7.0], [7.0, -2.0]])


def ident(x):
    return np.asarray(x, dtype=float)


def neg(x):
    return -np.asarray(x, dtype=float)


def rot(x):
    return np.array([-x[1], x[0]])


# ---------------------------------------------------------------- Bolzano


def test_bolzano_examples():
    c = check_bolzano(lambda x: x**3 - 2, 0, 2)
    assert c.verdict is Verdict.CERTIFIED and c.sign == -1
    assert c.details["fa"] == -2 and c.details["fb"] == 6
    assert check_bolzano(lambda x: x**2, -1, 1).verdict is Verdict.INCONCLUSIVE
    c = check_bolzano(lambda x: x, 0, 1)
    assert c.verdict is Verdict.INCONCLUSIVE and "zero" in c.reason
    with pytest.raises(ValueError):
        check_bolzano(ident, 1, 0)


# ---------------------------------------------------------------- Miranda


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("L", [0.5, 2.0])
def test_miranda_negative_identity(n, L):
    box = BoxDomain.cube(L, n)
    for rigor in (Sampled(5), Lipschitz(1.0)):
        c = check_miranda(neg, box, rigor)
        assert c.certified and c.sign == -1
        assert set(c.margins) == {str(f) for f in geo.faces(box)}
        assert all(m == pytest.approx(L, rel=1e-12) for m in c.margins.values())


def test_miranda_swap_map_not_certified():
    box = BoxDomain.cube(1, 2)
    c = check_miranda(lambda x: np.array([x[1], x[0]]), box)
    assert c.verdict in (Verdict.INCONCLUSIVE, Verdict.REFUTED)
    w = c.witness
    assert w is not None and box.contains(w)
    assert np.max(np.abs(w)) == 1  # on the boundary


def test_miranda_lipschitz_finds_witness_past_zero_cells():
    # f_1 = x_2 vanishes at a face center; the violation lies further along the face
    c = check_miranda(lambda x: np.array([x[1], x[0]]), BoxDomain.cube(1, 2), Lipschitz(1.0))
    assert c.refuted
    f = np.array([c.witness[1], c.witness[0]])
    assert any(abs(c.witness[i]) == 1 and f[i] != 0 for i in range(2))


def perturbed(x):
    return np.array([-x[0] + 0.1 * math.sin(x[1]), -x[1] + 0.1 * math.sin(x[0])])


def _face_oracle_margin(f, box, density=401):
    """Minimum of -s f_i on every face (i, s), from a dense face grid."""
    worst = math.inf
    for p, face in geo.boundary_grid(box, density):
        worst = min(worst, -face.side * f(p)[face.axis - 1])
    return worst


def test_miranda_perturbed_lipschitz():
    box = BoxDomain.cube(1, 2)
    c = check_miranda(perturbed, box, Lipschitz(1.1))
    assert c.certified and c.sign == -1
    oracle = _face_oracle_margin(perturbed, box)
    assert oracle >= 0.9
    assert c.min_margin >= 0.9 - 1e-12


def test_miranda_refuted_with_concrete_witness():
    box = BoxDomain.cube(1, 2)
    bad = lambda x: np.array([x[0], -x[1]])  # one face pair each way
    for rigor in (Sampled(7), Lipschitz(1.0)):
        c = check_miranda(bad, box, rigor)
        assert c.refuted
        assert box.contains(c.witness)
        assert any(c.witness[i] in (-1, 1) for i in range(2))


def test_miranda_classical_orientation_flips_sign():
    c = check_miranda(ident, BoxDomain.cube(1, 3))
    assert c.certified and c.sign == 1


def test_miranda_lipschitz_budget_exhaustion_is_inconclusive():
    # f_1 vanishes at one corner of face 1-: no finite subdivision can certify strictly
    f = lambda x: np.array([-(x[0] + 1) * 0 - (x[1] - 1) ** 2, -x[1]])
    c = check_miranda(f, BoxDomain.cube(1, 2), Lipschitz(4.0, max_depth=4, cell_budget=200))
    assert c.verdict is not Verdict.CERTIFIED


def test_miranda_matrix_lipschitz_bound():
    # long thin box: entrywise derivative bounds certify where a scalar L_f would need tiny cells
    half = np.array([1.0, 10.0, 100.0])
    f = lambda x: -x + 0.01 * np.sin(x[::-1])
    M = np.eye(3) + 0.01 * np.fliplr(np.eye(3))
    c = check_miranda(f, BoxDomain(-half, half), Lipschitz(M))
    assert c.certified


def test_miranda_montecarlo_high_dimension():
    box = BoxDomain.cube(1, 20)
    c = check_miranda(neg, box, MonteCarlo(2000, seed=1))
    assert c.certified and c.min_margin == pytest.approx(1)


# ---------------------------------------------------------------- pairing / ray / normal cone


def test_pairing_examples():
    c = check_pairing_sign(ident, UNIT_BALL, [0, 0], Space(2))
    assert c.certified and c.sign == 1 and c.min_margin == pytest.approx(1)
    c = check_pairing_sign(neg, UNIT_BALL, [0, 0], Space(2))
    assert c.certified and c.sign == -1
    c = check_pairing_sign(rot, UNIT_BALL, [0, 0], Space(2))
    assert c.verdict is Verdict.INCONCLUSIVE


def test_pairing_refuted_on_sign_change():
    c = check_pairing_sign(lambda x: np.array([x[0], -x[1]]), UNIT_BALL, [0, 0], Space(2))
    assert c.refuted and c.witness is not None


def test_pairing_requires_interior_anchor():
    with pytest.raises(ValueError):
        check_pairing_sign(ident, UNIT_BALL, [1, 0], Space(2))


@pytest.mark.parametrize("norm_name", ["l1", "linf", "l3"])
def test_pairing_non_euclidean_box(norm_name):
    box = BoxDomain.cube(1, 3)
    sp = Space.parse(3, norm_name)
    for kind in ("plus", "minus"):
        c = check_pairing_sign(neg, box, [0, 0, 0], sp, kind, Sampled(5))
        assert c.certified and c.sign == -1


def test_pairing_lipschitz_certifies_with_margin():
    f = lambda x: -np.asarray(x) + 0.1 * np.array([math.sin(x[1]), math.cos(x[0])])
    c = check_pairing_sign(f, UNIT_BALL, [0, 0], Space(2), rigor=Lipschitz(1.2))
    assert c.certified and c.sign == -1


def test_ray_examples():
    c = check_ray_condition(ident, UNIT_BALL, [0, 0])
    assert c.certified and c.details["clauses"]["negative"]["holds"]
    c = check_ray_condition(neg, UNIT_BALL, [0, 0])
    clauses = c.details["clauses"]
    assert not clauses["negative"]["holds"] and clauses["negative"]["witness"] is not None
    assert clauses["positive"]["holds"]
    c = check_ray_condition(rot, UNIT_BALL, [0, 0])
    assert c.certified
    assert c.details["clauses"]["negative"]["holds"] and c.details["clauses"]["positive"]["holds"]


def test_ray_refuted_when_both_clauses_fail():
    # f = -x on the left half, +x on the right half of the circle
    f = lambda x: np.asarray(x) * (1.0 if x[0] > 0 else -1.0)
    c = check_ray_condition(f, UNIT_BALL, [0, 0])
    assert c.refuted


def test_normal_cone_examples():
    box = BoxDomain.cube(1, 2)
    assert check_normal_cone(ident, box).certified
    c = check_normal_cone(neg, box)
    assert c.refuted and c.witness is not None


def test_normal_cone_reduction_from_miranda():
    # a Miranda-compliant f becomes normal-cone compliant after g := -f
    box = BoxDomain.cube(1, 2)
    assert check_miranda(perturbed, box).certified
    g = lambda x: -perturbed(x)
    c = check_normal_cone(g, box)
    assert c.certified and c.min_margin > 0
    c = check_normal_cone(g, box, Lipschitz(1.1))
    assert c.certified


def test_normal_cone_points_ball():
    sphere = [p for p, _ in geo.boundary_grid(BallDomain([0, 0, 0], 1), 5)]
    c = check_normal_cone_points(ident, sphere, lambda x: x)
    assert c.certified
    assert check_normal_cone_points(neg, sphere, lambda x: x).refuted


# ---------------------------------------------------------------- orientation symmetry, refinement


SYM_CASES = [
    (neg, BoxDomain.cube(1, 2)),
    (perturbed, BoxDomain.cube(1, 2)),
    (lambda x: np.array([x[1], x[0]]), BoxDomain.cube(1, 2)),
    (lambda x: -np.asarray(x) ** 3 - 0.2, BoxDomain.cube(1, 3)),
]


@pytest.mark.parametrize("f, box", SYM_CASES)
def test_miranda_orientation_symmetry(f, box):
    a = check_miranda(f, box)
    b = check_miranda(lambda x: -f(x), box)
    assert a.verdict == b.verdict
    if a.certified:
        assert a.sign == -b.sign


@pytest.mark.parametrize("f", [ident, neg, rot, perturbed, lambda x: np.array([x[0], -x[1]])])
def test_pairing_orientation_symmetry(f):
    a = check_pairing_sign(f, UNIT_BALL, [0, 0], Space(2))
    b = check_pairing_sign(lambda x: -f(x), UNIT_BALL, [0, 0], Space(2))
    assert a.verdict == b.verdict
    if a.certified:
        assert a.sign == -b.sign


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_sampled_margin_monotone_under_refinement(d, a, b):
    f = lambda x: -np.asarray(x) + np.array([a * math.sin(3 * x[1]), b * x[0] ** 2])
    box = BoxDomain.cube(1, 2)
    coarse = check_miranda(f, box, Sampled(d))
    fine = check_miranda(f, box, Sampled(2 * d - 1))  # face grids nest
    if coarse.certified and fine.certified:
        assert fine.min_margin <= coarse.min_margin
    if coarse.refuted:
        assert not fine.certified


# ---------------------------------------------------------------- soundness vs the grid oracle

# (map, box, analytic sup-norm Lipschitz constant)
CORPUS = [
    (neg, BoxDomain.cube(1, 1), 1.0),
    (neg, BoxDomain.cube(1, 2), 1.0),
    (neg, BoxDomain.cube(2, 3), 1.0),
    (perturbed, BoxDomain.cube(1, 2), 1.1),
    (lambda x: -np.asarray(x) + 0.3, BoxDomain.cube(1, 2), 1.0),
    (lambda x: np.array([-2 * x[0] + 0.5 * x[1], -x[1] + 0.25 * x[0]]), BoxDomain.cube(1, 2), 2.5),
    (lambda x: np.array([-x[0] ** 3 - x[0] + 0.2]), BoxDomain.cube(1.5, 1), 7.75),
    (lambda x: np.array([-math.sinh(x[0]) + 0.1, -x[1] + 0.2 * math.cos(x[0])]), BoxDomain.cube(1, 2), math.cosh(1)),
    (lambda x: -np.asarray(x) + 0.1 * np.array([math.sin(x[2]), math.sin(x[0]), math.sin(x[1])]),
     BoxDomain.cube(1, 3), 1.1),
    (lambda x: np.array([x[0] - 0.5, x[1] + 0.25]), BoxDomain.cube(1, 2), 1.0),
    (lambda x: np.array([-(x[0] - 0.4), -(x[1] + 0.1) - 0.3 * x[0]]), BoxDomain([-1, -2], [1.5, 2]), 1.3),
    (lambda x: np.array([-math.tanh(2 * x[0]) + 0.3 * x[1], -x[1] - 0.2]), BoxDomain.cube(1, 2), 2.3),
]


@pytest.mark.parametrize("k", range(len(CORPUS)))
def test_lipschitz_miranda_soundness(k):
    f, box, L = CORPUS[k]
    c = check_miranda(f, box, Lipschitz(L))
    assert c.certified, c.reason
    res = 41 if box.dim <= 2 else 21
    x, r = grid_oracle(f, box, res)
    half_cell = float(np.max(box.hi - box.lo)) / (res - 1) / 2
    assert box.contains(x)
    assert r <= L * half_cell + 1e-12


@pytest.mark.parametrize("k", [0, 1, 3, 4, 5, 7])
def test_lipschitz_normal_cone_and_pairing_soundness(k):
    f, box, L = CORPUS[k]
    g = lambda x: -f(x)
    assert check_normal_cone(g, box, Lipschitz(L)).certified
    x, r = grid_oracle(f, box, 41)
    assert r <= L * float(np.max(box.hi - box.lo)) / 80 + 1e-12


# ---------------------------------------------------------------- ell and linear growth


def _inverse_power_sigma_min(a, iters=500):
    """Independent oracle: inverse power iteration on A^T A."""
    m = a.T @ a
    v = np.ones(a.shape[0]) / math.sqrt(a.shape[0])
    lam = 0.0
    for _ in range(iters):
        w = np.linalg.solve(m, v)
        v = w / np.linalg.norm(w)
        lam = float(v @ m @ v)
    return math.sqrt(lam)


def test_ell_examples():
    assert compute_ell(L_S, Space(2, "linf")) == pytest.approx(5, abs=1e-6)
    for name in ("l1", "l2", "l3", "linf"):
        for n in (1, 2, 3):
            assert compute_ell(np.eye(n), Space.parse(n, name)) == pytest.approx(1, abs=1e-12)
    assert compute_ell([[1, 0], [0, 0]], Space(2)) == 0


def test_ell_l2_matches_eigen_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        a = rng.normal(size=(3, 3))
        ell = compute_ell(a, Space(3))
        assert ell == pytest.approx(_inverse_power_sigma_min(a), abs=1e-9)
        assert ell == pytest.approx(np.linalg.svd(a, compute_uv=False)[-1], abs=1e-9)
        assert smallest_singular_value(a) == pytest.approx(ell, abs=1e-12)


@pytest.mark.parametrize("name, refinement", [("l1", 9), ("linf", 9), ("l3", 9)])
def test_ell_other_norms_against_sphere_sampling(name, refinement):
    rng = np.random.default_rng(5)
    sp = Space.parse(2, name)
    t = np.linspace(0, 2 * np.pi, 20001)
    circle = np.stack([np.cos(t), np.sin(t)], axis=1)
    for _ in range(5):
        a = rng.normal(size=(2, 2))
        sampled = min(norm(sp, a @ v) / norm(sp, v) for v in circle)
        ell = compute_ell(a, sp, refinement=refinement)
        assert ell <= sampled + 10.0**-refinement
        assert ell >= sampled - 1e-3 * (1 + sampled)


def _pnorm_power(b, p, starts=40, iters=300, seed=0):
    """Independent oracle: p-norm power iteration on b from many random starts."""
    q = p / (p - 1)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(starts):
        x = rng.normal(size=b.shape[1])
        for _ in range(iters):
            x /= np.sum(np.abs(x) ** p) ** (1 / p)
            y = b @ x
            z = b.T @ (np.sign(y) * np.abs(y) ** (p - 1))
            x = np.sign(z) * np.abs(z) ** (q - 1)
        x /= np.sum(np.abs(x) ** p) ** (1 / p)
        best = max(best, float(np.sum(np.abs(b @ x) ** p) ** (1 / p)))
    return best


@pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_ell_lp_matches_power_iteration(p, n):
    rng = np.random.default_rng(int(10 * p) + n)
    sp = Space(n, "lp", p=p)
    for _ in range(5):
        a = rng.normal(size=(n, n))
        oracle = 1.0 / _pnorm_power(np.linalg.inv(a), p)
        assert compute_ell(a, sp) == pytest.approx(oracle, abs=1e-8, rel=1e-8)


def test_ell_closed_form_matches_face_subdivision():
    rng = np.random.default_rng(11)
    for n in (2, 3, 4):
        for _ in range(5):
            a = rng.normal(size=(n, n))
            sp = Space(n, "linf")
            assert compute_ell(a, sp) == pytest.approx(ell_by_subdivision(a, sp, 1e-9), abs=2e-9)
    sp = Space(2, "linf")
    assert ell_by_subdivision(L_S, sp, 1e-9) == pytest.approx(5, abs=1e-9)


def test_linear_growth_system_s():
    g = MapSpec.from_strings(["4*x2*cos(x1 + 2*x2) - 3", "3*x1*sin(x1 - 3*x2) - 2"], 2)
    c = check_linear_growth(L_S, g, Space(2, "linf"), 4, 3)
    assert c.certified
    assert c.details["ell"] == pytest.approx(5, abs=1e-6)
    assert c.details["R"] == pytest.approx(3 / (c.details["ell"] - 4), abs=1e-12)
    assert c.details["box"] == {"lo": [-c.details["R"]] * 2, "hi": [c.details["R"]] * 2}


def test_linear_growth_edge_cases():
    zero = lambda x: np.zeros(2)
    c = check_linear_growth(np.eye(2) * 3, zero, Space(2), 0, 0)
    assert c.certified and c.details["R"] == 0
    c = check_linear_growth(L_S, zero, Space(2, "linf"), 5, 1)
    assert c.verdict is Verdict.INCONCLUSIVE
    # a g that violates the claimed bound is refuted with a witness
    c = check_linear_growth(np.eye(2) * 3, lambda x: 10 * np.asarray(x), Space(2), 1, 1)
    assert c.refuted and c.witness is not None


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2), st.floats(0, 5))
def test_radius_identity(alpha, beta):
    a = np.array([[3.0, 1.0], [-1.0, 4.0]])
    c = check_linear_growth(a, lambda x: np.zeros(2), Space(2), alpha, beta)
    assert c.details["R"] == pytest.approx(beta / (c.details["ell"] - alpha), rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------- Hilbert cube, ODE inward


def test_hilbert_cube_examples():
    c = check_hilbert_cube(neg, 5, Sampled(7))
    assert c.certified
    N = 4

    def coupled(x):
        k = np.arange(1, N + 1)
        return -x + 0.5 * np.roll(x, -1) / (k + 1)

    assert check_hilbert_cube(coupled, N, Sampled(9)).certified
    assert check_hilbert_cube(ident, 5, Sampled(3)).refuted


@pytest.mark.parametrize("N", [20, 50])
def test_hilbert_cube_large_truncations(N):
    assert check_hilbert_cube(neg, N, Lipschitz(np.eye(N))).certified
    assert check_hilbert_cube(neg, N, MonteCarlo(500)).certified


def test_ode_inward_examples():
    f = MapSpec.from_strings(["-x1 + cos(t)"], 1, time_dependent=True)
    c = check_ode_inward(f, 2 * math.pi, 2, Space(1))
    assert c.certified and c.margins["inward"] >= 2 - 1e-6
    c = check_ode_inward(MapSpec.from_strings(["x1"], 1, True), 1, 1, Space(1))
    assert c.refuted and c.witness.size == 2
    c = check_ode_inward(MapSpec.from_strings(["-x2", "x1"], 2, True), 1, 1, Space(2))
    assert c.certified and c.margins["inward"] == pytest.approx(0, abs=1e-15)


def test_certificate_serializes():
    c = check_miranda(neg, BoxDomain.cube(1, 2), Lipschitz(np.eye(2)))
    d = c.to_dict()
    assert d["condition"] == Condition.MIRANDA.value and d["verdict"] == "certified"
    assert d["rigor"]["constant"] == [[1.0, 0.0], [0.0, 1.0]]
    assert d["conclusion"] == "zero in the domain: guaranteed given the Lipschitz constant"


def test_conclusion_tracks_rigor():
    box = BoxDomain.cube(1, 2)
    assert check_miranda(neg, box, Sampled(5)).conclusion.endswith("sampled evidence only")
    est = Lipschitz(1.0, source="estimate")
    assert "estimated" in check_miranda(neg, box, est).conclusion
    assert check_bolzano(lambda x: x**3 - 2, 0, 2).conclusion.endswith(": guaranteed")
    assert check_miranda(lambda x: x * [1, -1], box, Sampled(5)).conclusion == ""
    ode = check_ode_inward(MapSpec.from_strings(["-x1 + cos(t)"], 1, True), 2 * np.pi, 2, Space(1))
    assert ode.conclusion.startswith("T-periodic solution")
