"""Drift corrector: brute-force agreement, limits, symmetry, frame freedom."""

import numpy as np
import pytest

from vortexnoise import (angular_integral_check, build_lattice, corrector_limit,
                         corrector_perp, corrector_S_theta, l2_inner, laplacian,
                         make_theta_N, random_solenoidal, shell_sin4_average,
                         zero_field)
from vortexnoise.corrector import assemble_corrector_matrices
from vortexnoise.lattice import Lattice

from oracles import corrector_bruteforce, embed


def appendix_mode(lat, l=(1, 0, 0)):
    i = lat.index_of(l)
    v = zero_field(lat, real=False, solenoidal=True)
    v.coeffs[i] = lat.a1[i] + lat.a2[i]
    return v


@pytest.fixture(scope="module")
def theta2():
    return make_theta_N(2, 1.0, build_lattice(4))


class TestBruteForceAgreement:
    def test_probe_mode(self, theta2):
        v = appendix_mode(build_lattice(1))
        bf, out_lat = corrector_bruteforce(theta2, 1.0, v)
        main = corrector_S_theta(theta2, 1.0, embed(v, out_lat))
        scale = np.abs(main.coeffs).max()
        assert np.abs(bf.coeffs - main.coeffs).max() < 1e-11 * scale
        # the literal route confirms the corrector is mode-diagonal
        outside = out_lat.k2 > 1
        assert np.abs(bf.coeffs[outside]).max() < 1e-12 * scale

    def test_random_real_field(self, theta2):
        v = random_solenoidal(build_lattice(2), radius=2, seed=9)
        bf, out_lat = corrector_bruteforce(theta2, 1.3, v)
        main = corrector_S_theta(theta2, 1.3, embed(v, out_lat))
        scale = np.abs(main.coeffs).max()
        assert np.abs(bf.coeffs - main.coeffs).max() < 1e-11 * scale


class TestLimit:
    def test_zero_and_single_mode_factor(self, lat4):
        v = zero_field(lat4)
        assert np.abs(corrector_limit(1.0, v).coeffs).max() == 0.0
        i = lat4.index_of((1, 0, 0))
        v.coeffs[i, 1] = 1.0
        v.coeffs[lat4.conj_index[i], 1] = 1.0
        out = corrector_limit(1.0, v)
        assert abs(out.coeffs[i, 1] - (-0.6 * 4 * np.pi ** 2)) < 1e-12
        assert np.abs(corrector_limit(0.0, v).coeffs).max() == 0.0

    def test_error_decreases_along_shells(self, lat4):
        v = random_solenoidal(lat4, radius=4, seed=42, decay=0.25)
        nu = 1.0
        lim = corrector_limit(nu, v)
        den = np.sqrt(np.sum(np.abs(laplacian(v).coeffs) ** 2))
        errs = []
        for N in (2, 4, 8):
            th = make_theta_N(N, 1.0, build_lattice(2 * N))
            s = corrector_S_theta(th, nu, v)
            errs.append(np.sqrt(np.sum(np.abs(s.coeffs - lim.coeffs) ** 2)) / den)
        assert errs[0] > errs[1] > errs[2]

    def test_defining_identity_of_perp(self, theta2, lat4):
        v = random_solenoidal(lat4, radius=2, seed=3)
        nu = 0.8
        s = corrector_S_theta(theta2, nu, v)
        sp = corrector_perp(theta2, nu, v)
        full = nu * laplacian(v).coeffs
        assert np.abs(s.coeffs + sp.coeffs - full).max() < 1e-10 * np.abs(full).max()

    def test_perp_rayleigh_tends_to_two_fifths(self):
        v = appendix_mode(build_lattice(1))
        nu = 1.0
        lap = laplacian(v)
        den = l2_inner(lap, v).real
        vals = []
        for N in (2, 4, 8):
            th = make_theta_N(N, 1.0, build_lattice(2 * N))
            sp = corrector_perp(th, nu, v)
            vals.append(l2_inner(sp, v).real / den)
        errs = [abs(q - 0.4 * nu) for q in vals]
        assert errs[0] > errs[1] > errs[2]
        assert errs[-1] < 0.02


class TestOperatorStructure:
    @pytest.mark.parametrize("seed", range(20))
    def test_negative_semidefinite(self, theta2, lat4, seed):
        v = random_solenoidal(lat4, seed=seed)
        s = corrector_S_theta(theta2, 1.0, v)
        assert l2_inner(s, v).real <= 1e-10

    def test_quadratic_form_matches_shell_sum(self, theta2):
        # <S v, v> = -(C^2/|th|^2) sum_{k,a} th_k^2 |P(sigma_{k,a}.grad v)|^2
        from oracles import advect_pointwise, sigma_field
        from vortexnoise.fields import leray_project
        lat = build_lattice(2)
        v = random_solenoidal(lat, radius=2, seed=5)
        nu = 1.0
        s = corrector_S_theta(theta2, nu, v)
        lhs = l2_inner(s, v).real
        mid = build_lattice(2 + 4)
        vm = embed(v, mid)
        rhs = 0.0
        tl = theta2.lattice
        for idx in theta2.support:
            k = tl.modes[idx]
            for alpha in (0, 1):
                g = leray_project(advect_pointwise(sigma_field(tl, k, alpha), vm, mid))
                rhs += theta2.weights[idx] ** 2 * float(np.sum(np.abs(g.coeffs) ** 2))
        rhs *= -1.5 * nu / theta2.l2 ** 2
        assert abs(lhs - rhs) < 1e-9 * abs(rhs)

    def test_symmetric_on_solenoidal_pairs(self, theta2, lat4):
        v = random_solenoidal(lat4, seed=1)
        w = random_solenoidal(lat4, seed=2)
        sv = corrector_S_theta(theta2, 1.0, v)
        sw = corrector_S_theta(theta2, 1.0, w)
        assert abs(l2_inner(sv, w) - l2_inner(v, sw)) < 1e-9 * abs(l2_inner(sv, w) + 1)

    def test_frame_independence(self, theta2, lat4):
        """Replacing the frames by a rotated pair leaves the corrector unchanged."""
        tl = theta2.lattice
        ang = 0.7
        a1r = np.cos(ang) * tl.a1 + np.sin(ang) * tl.a2
        a2r = -np.sin(ang) * tl.a1 + np.cos(ang) * tl.a2
        rotated = Lattice(M=tl.M, modes=tl.modes, k2=tl.k2, sign=tl.sign,
                          a1=a1r, a2=a2r, conj_index=tl.conj_index,
                          _lookup=tl._lookup)
        theta_rot = make_theta_N(2, 1.0, rotated)
        v = random_solenoidal(lat4, seed=11)
        a = corrector_S_theta(theta2, 1.0, v)
        b = corrector_S_theta(theta_rot, 1.0, v)
        assert np.abs(a.coeffs - b.coeffs).max() < 1e-12 * np.abs(a.coeffs).max()

    def test_real_and_solenoidal_output(self, theta2, lat4):
        v = random_solenoidal(lat4, seed=8)
        s = corrector_S_theta(theta2, 1.0, v)
        s.check_real(1e-11)
        s.check_solenoidal()

    def test_matrices_symmetric(self, theta2, lat4):
        mats = assemble_corrector_matrices(theta2, 1.0, lat4)
        assert np.abs(mats - np.swapaxes(mats, 1, 2)).max() < 1e-11 * np.abs(mats).max()
        # eigenvalues within [-nu * 4 pi^2 |k|^2, 0]
        lam = np.linalg.eigvalsh(mats)
        bound = 4 * np.pi ** 2 * lat4.k2.astype(float)
        assert lam.max() < 1e-8
        assert np.all(lam.min(axis=1) > -bound * (1 + 1e-9))


class TestAngularFactors:
    def test_integral_value(self):
        assert abs(angular_integral_check() - 8.0 / 15.0) < 1e-10

    def test_denominator_sanity(self):
        from scipy.integrate import quad
        val, _ = quad(lambda p: np.sin(p), 0, np.pi)
        assert abs(0.5 * val - 1.0) < 1e-12

    def test_shell_average_converges(self):
        devs = [abs(shell_sin4_average(N, 1.0) - 8 / 15) / (8 / 15) for N in (2, 4, 8)]
        assert devs[0] > devs[2]
        assert devs[2] < 0.05
