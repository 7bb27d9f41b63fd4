import math

import numpy as np
import pytest

from subdecay.errors import DomainError, SolverError
from subdecay.mittag_leffler import ml_neg
from subdecay.subdiff_fd import (BandedMatrix, Grid, SystemSpec,
                                 assemble_block_matrix, banded_from_dense,
                                 banded_solve, gershgorin_disks, l1_weights,
                                 norm_history, simulate, stability_condition,
                                 stability_margin, step_fully_implicit,
                                 step_semi_implicit)

HAT = lambda x: np.pi / 2 - np.abs(x - np.pi / 2)
ZERO = lambda x: np.zeros_like(x)


def single_component(alpha, source=None, d=1.0):
    return SystemSpec(orders=(alpha,), diffusivities=(d,), couplings=[[0.0]],
                      initials=[np.sin], sources=None if source is None else [source])


class TestWeights:
    def test_first_weight(self):
        assert l1_weights(0.5, 0)[0] == 1.0

    def test_second_weight_value(self):
        assert l1_weights(0.5, 1)[1] == pytest.approx(math.sqrt(2.0) - 1.0, rel=1e-15)

    def test_backward_euler_degeneration(self):
        b = l1_weights(1.0, 6)
        assert b[0] == 1.0 and np.all(b[1:] == 0.0)

    @pytest.mark.parametrize("gamma", [0.3, 0.5, 0.7, 0.9, 1.0])
    def test_identities_bulk(self, gamma):
        n = 10_000
        b = l1_weights(gamma, n)
        assert b[0] == 1.0
        assert np.all(b > 0.0) if gamma < 1.0 else np.all(b[:1] > 0.0)
        if gamma < 1.0:
            assert np.all(np.diff(b) < 0.0)
        assert b.sum() == pytest.approx((n + 1) ** (1.0 - gamma), rel=1e-13)

    def test_rejects_bad_order(self):
        with pytest.raises(DomainError):
            l1_weights(0.0, 4)
        with pytest.raises(DomainError):
            l1_weights(1.2, 4)


class TestBandedSolve:
    def test_identity(self):
        eye = BandedMatrix(lower=0, upper=0, ab=np.ones((1, 5)))
        rhs = np.array([1.0, -2.0, 3.0, 0.5, 4.0])
        assert np.array_equal(banded_solve(eye, rhs), rhs)

    def test_two_by_two_closed_form(self):
        dense = np.array([[2.0, 1.0], [1.0, 3.0]])
        rhs = np.array([5.0, 10.0])
        x = banded_solve(dense, rhs)
        assert x == pytest.approx([1.0, 3.0], rel=1e-14)

    def test_random_tridiagonal_against_dense(self, rng):
        for _ in range(25):
            n = 5
            dense = np.zeros((n, n))
            for i in range(n):
                for j in range(max(0, i - 1), min(n, i + 2)):
                    dense[i, j] = rng.uniform(-1.0, 1.0)
                dense[i, i] = 3.0 + abs(dense[i, i])
            rhs = rng.uniform(-1, 1, size=n)
            x = banded_solve(dense, rhs)
            ref = np.linalg.solve(dense, rhs)
            assert np.max(np.abs(x - ref)) < 1e-12

    def test_wider_band_against_dense(self, rng):
        n = 40
        dense = np.zeros((n, n))
        for i in range(n):
            for j in range(max(0, i - 3), min(n, i + 3)):
                dense[i, j] = rng.uniform(-1, 1)
            dense[i, i] = 8.0
        rhs = rng.uniform(-1, 1, size=n)
        x = banded_solve(banded_from_dense(dense), rhs)
        assert np.max(np.abs(dense @ x - rhs)) < 1e-12 * np.abs(rhs).max() * 100

    def test_singular_raises(self):
        dense = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(SolverError):
            banded_solve(dense, np.array([1.0, 2.0]))

    def test_shape_mismatch(self):
        eye = BandedMatrix(lower=0, upper=0, ab=np.ones((1, 4)))
        with pytest.raises(DomainError):
            banded_solve(eye, np.ones(5))


class TestAssembly:
    def grid(self, I=3):
        return Grid(L=math.pi, I=I, T=1.0, N=4)

    def spec2(self):
        return SystemSpec(orders=(0.9, 0.5), diffusivities=(1.0, 2.0),
                          couplings=[[1.0, -1.0], [-1.0, 1.0]],
                          initials=[np.sin, HAT])

    def test_hand_expanded_two_by_two_blocks(self):
        grid = self.grid(I=3)
        spec = self.spec2()
        A = assemble_block_matrix(spec, grid, 0).to_dense()
        dt, dx = grid.dt, grid.dx
        r = [d * math.gamma(2.0 - a) * dt ** a / dx ** 2
             for a, d in zip(spec.orders, spec.diffusivities)]
        fac = [dx ** 2 * r[k] / spec.diffusivities[k] for k in range(2)]
        expected = np.zeros((4, 4))
        # interleaved ordering: (node0,e1), (node0,e2), (node1,e1), (node1,e2)
        expected[0, 0] = 1 + 2 * r[0] + fac[0] * 1.0
        expected[1, 1] = 1 + 2 * r[1] + fac[1] * 1.0
        expected[2, 2] = 1 + 2 * r[0] + fac[0] * 1.0
        expected[3, 3] = 1 + 2 * r[1] + fac[1] * 1.0
        expected[0, 1] = fac[0] * -1.0
        expected[1, 0] = fac[1] * -1.0
        expected[2, 3] = fac[0] * -1.0
        expected[3, 2] = fac[1] * -1.0
        expected[0, 2] = expected[2, 0] = -r[0]
        expected[1, 3] = expected[3, 1] = -r[1]
        assert np.array_equal(A, expected)

    def test_single_component_reduces_to_tridiagonal(self):
        grid = Grid(L=math.pi, I=6, T=1.0, N=4)
        spec = single_component(0.7)
        m = assemble_block_matrix(spec, grid, 0)
        assert m.lower == 1 and m.upper == 1
        dense = m.to_dense()
        r = spec.diffusivities[0] * math.gamma(1.3) * grid.dt ** 0.7 / grid.dx ** 2
        assert np.allclose(np.diag(dense), 1 + 2 * r)
        assert np.allclose(np.diag(dense, 1), -r)
        assert np.allclose(np.diag(dense, -1), -r)

    def test_bandwidth_bound(self):
        grid = Grid(L=math.pi, I=8, T=1.0, N=4)
        spec = SystemSpec(orders=(0.9, 0.5, 0.3), diffusivities=(1.0, 1.0, 1.0),
                          couplings=[[1.0, -0.5, -0.5], [-0.5, 1.0, -0.5],
                                     [-0.5, -0.5, 1.0]],
                          initials=[np.sin, HAT, ZERO])
        m = assemble_block_matrix(spec, grid, 0)
        assert m.lower == 3 and m.upper == 3  # 2K+1 = 7 bands total

    def test_diagonal_dominance_under_stability_condition(self):
        grid = self.grid(I=12)
        spec = self.spec2()
        assert stability_condition(spec)
        A = assemble_block_matrix(spec, grid, 0).to_dense()
        for i in range(A.shape[0]):
            off = np.sum(np.abs(A[i])) - abs(A[i, i])
            assert abs(A[i, i]) >= off + 1.0 - 1e-12


class TestGershgorin:
    def test_identity_disks(self):
        disks = gershgorin_disks(np.eye(4))
        assert disks == [(1.0, 0.0)] * 4

    def test_interior_row_formulas(self):
        grid = Grid(L=math.pi, I=8, T=1.0, N=4)
        spec = SystemSpec(orders=(0.9, 0.5), diffusivities=(1.0, 1.0),
                          couplings=[[1.0, -1.0], [-1.0, 1.0]],
                          initials=[np.sin, HAT])
        A = assemble_block_matrix(spec, grid, 0)
        disks = gershgorin_disks(A)
        r1 = math.gamma(1.1) * grid.dt ** 0.9 / grid.dx ** 2
        fac1 = grid.dx ** 2 * r1
        interior = disks[2]  # node 1 (interior), component 1
        assert interior[0] == pytest.approx(1 + 2 * r1 + fac1 * 1.0, rel=1e-14)
        assert interior[1] == pytest.approx(2 * r1 + fac1 * 1.0, rel=1e-14)

    def test_disks_outside_unit_ball_when_stable(self):
        grid = Grid(L=math.pi, I=16, T=2000.0, N=200)
        spec = SystemSpec(orders=(0.9, 0.5), diffusivities=(1.0, 1.0),
                          couplings=[[1.0, -1.0], [-1.0, 1.0]],
                          initials=[np.sin, HAT])
        disks = gershgorin_disks(assemble_block_matrix(spec, grid, 0))
        assert min(abs(c) - r for c, r in disks) >= 1.0 - 1e-9


class TestStabilityCondition:
    def test_reference_two_component_setup(self):
        spec = SystemSpec(orders=(0.9, 0.5), diffusivities=(1.0, 1.0),
                          couplings=[[1.0, -1.0], [-1.0, 1.0]],
                          initials=[np.sin, HAT])
        assert stability_condition(spec)
        assert stability_margin(spec) == 0.0  # equality case, flagged marginal

    def test_reference_three_component_setup(self):
        spec = SystemSpec(orders=(0.9, 0.5, 0.3), diffusivities=(1.0, 1.0, 1.0),
                          couplings=[[1.0, -0.5, -0.5], [-0.5, 1.0, -0.5],
                                     [-0.5, -0.5, 1.0]],
                          initials=[np.sin, HAT, ZERO])
        assert stability_condition(spec)

    def test_violating_coupling(self):
        spec = SystemSpec(orders=(0.9, 0.5), diffusivities=(1.0, 1.0),
                          couplings=[[0.0, 1.0], [0.0, 1.0]],
                          initials=[np.sin, HAT])
        assert not stability_condition(spec)

    def test_time_dependent_requires_grid(self):
        spec = SystemSpec(orders=(0.9,), diffusivities=(1.0,),
                          couplings=[[lambda x, t: 1.0 + 0.0 * x]],
                          initials=[np.sin])
        with pytest.raises(DomainError):
            stability_condition(spec)
        assert stability_condition(spec, Grid(L=math.pi, I=8, T=1.0, N=4))


class TestStepping:
    def test_zero_data_stays_zero(self):
        grid = Grid(L=math.pi, I=16, T=1.0, N=16)
        spec = SystemSpec(orders=(0.9, 0.5), diffusivities=(1.0, 1.0),
                          couplings=[[1.0, -1.0], [-1.0, 1.0]],
                          initials=[ZERO, ZERO])
        hist = simulate(spec, grid)
        assert np.all(hist.values == 0.0)

    def test_heat_equation_benchmark(self):
        grid = Grid(L=math.pi, I=64, T=1.0, N=256)
        hist = simulate(single_component(1.0), grid)
        _, norms = norm_history(hist)
        exact = math.exp(-1.0) * math.sqrt(math.pi / 2.0)
        assert norms[-1, 0] == pytest.approx(exact, rel=8e-3)

    def test_fractional_decoupled_against_mittag_leffler(self):
        grid = Grid(L=math.pi, I=128, T=1.0, N=1024)
        hist = simulate(single_component(0.5), grid)
        _, norms = norm_history(hist)
        exact = float(ml_neg(0.5, 1.0, -1.0)) * math.sqrt(math.pi / 2.0)
        assert norms[-1, 0] == pytest.approx(exact, rel=1e-3)
        # error decreases under time refinement (layer-limited rate)
        hist2 = simulate(single_component(0.5), Grid(L=math.pi, I=128, T=1.0, N=4096))
        _, norms2 = norm_history(hist2)
        err1 = abs(norms[-1, 0] - exact)
        err2 = abs(norms2[-1, 0] - exact)
        assert err2 < 0.6 * err1

    def test_boundary_identically_zero(self):
        grid = Grid(L=math.pi, I=16, T=1.0, N=32)
        spec = SystemSpec(orders=(0.9, 0.5), diffusivities=(1.0, 1.0),
                          couplings=[[1.0, -1.0], [-1.0, 1.0]],
                          initials=[np.sin, HAT])
        hist = simulate(spec, grid)
        assert np.all(hist.values[:, :, 0] == 0.0)
        assert np.all(hist.values[:, :, -1] == 0.0)
        assert np.array_equal(hist.values[0, 0, 1:-1], np.sin(grid.x[1:-1]))

    def test_schemes_coincide_without_coupling(self):
        grid = Grid(L=math.pi, I=32, T=1.0, N=64)
        const_src = lambda x, t: np.sin(x)  # time-constant source
        spec = SystemSpec(orders=(0.9, 0.5), diffusivities=(1.0, 1.0),
                          couplings=[[0.0, 0.0], [0.0, 0.0]],
                          initials=[np.sin, HAT],
                          sources=[const_src, None])
        hs = simulate(spec, grid, "semi-implicit")
        hf = simulate(spec, grid, "fully-implicit")
        assert np.max(np.abs(hs.values - hf.values)) < 1e-13

    def test_scheme_difference_first_order_in_dt(self):
        spec = SystemSpec(orders=(0.9, 0.5), diffusivities=(1.0, 1.0),
                          couplings=[[1.0, -1.0], [-1.0, 1.0]],
                          initials=[np.sin, HAT])

        def diff_at(N):
            grid = Grid(L=math.pi, I=32, T=1.0, N=N)
            hs = simulate(spec, grid, "semi-implicit")
            hf = simulate(spec, grid, "fully-implicit")
            d = hs.values[-1] - hf.values[-1]
            return math.sqrt(grid.dx * np.sum(d[:, 1:-1] ** 2))

        d1, d2 = diff_at(64), diff_at(128)
        assert d1 / d2 == pytest.approx(2.0, abs=0.6)

    def test_three_component_residual(self):
        grid = Grid(L=math.pi, I=24, T=1.0, N=8)
        spec = SystemSpec(orders=(0.9, 0.5, 0.3), diffusivities=(1.0, 1.0, 1.0),
                          couplings=[[1.0, -0.5, -0.5], [-0.5, 1.0, -0.5],
                                     [-0.5, -0.5, 1.0]],
                          initials=[np.sin, HAT, lambda x: x * (np.pi - x)])
        hist = simulate(spec, grid, "fully-implicit")
        # re-check the level-N linear system residual explicitly
        n = grid.N - 1
        values = hist.values
        A = assemble_block_matrix(spec, grid, n + 1)
        from subdecay.subdiff_fd import _StepContext, _interior_rhs_common
        ctx = _StepContext(spec, grid)
        rhs = _interior_rhs_common(ctx, values, n)
        sol = values[n + 1, :, 1:-1].T.reshape(-1)
        resid = np.max(np.abs(A.matvec(sol) - rhs.T.reshape(-1)))
        assert resid < 1e-10 * max(1.0, np.abs(rhs).max())

    def test_public_step_functions_match_simulate(self):
        grid = Grid(L=math.pi, I=16, T=1.0, N=8)
        spec = SystemSpec(orders=(0.9, 0.5), diffusivities=(1.0, 1.0),
                          couplings=[[1.0, -1.0], [-1.0, 1.0]],
                          initials=[np.sin, HAT])
        for scheme, step in (("semi-implicit", step_semi_implicit),
                             ("fully-implicit", step_fully_implicit)):
            hist = simulate(spec, grid, scheme)
            level3 = step(spec, grid, hist.values[:3], 2)
            assert np.allclose(level3, hist.values[3], atol=1e-14)

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            SystemSpec(orders=(0.5, 0.9), diffusivities=(1.0, 1.0),
                       couplings=[[1.0, 0.0], [0.0, 1.0]], initials=[np.sin, HAT])
        with pytest.raises(DomainError):
            SystemSpec(orders=(0.9,), diffusivities=(0.0,), couplings=[[0.0]],
                       initials=[np.sin])
        with pytest.raises(DomainError):
            SystemSpec(orders=(0.9,), diffusivities=(1.0,), couplings=[[-0.2]],
                       initials=[np.sin])
        with pytest.raises(DomainError):
            Grid(L=math.pi, I=1, T=1.0, N=4)
