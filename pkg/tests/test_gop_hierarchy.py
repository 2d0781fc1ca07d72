import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdlambda.curve_fitting import fit_proposed
from rdlambda.gop_hierarchy import (
    GAMMA_CAP_FRACTION,
    INIT_BETA,
    LD_OMEGA,
    RA_OMEGA,
    StructureKind,
    build_structure,
    default_omega,
    init_coefficients,
    level_efficiency_check,
)
from rdlambda.model_core import RdGroundTruth
from rdlambda.virtual_encoder import curve_samples

# (poc, level, ref num, qp offset, lambda multiplier) of the reference
# RA and LD coding structures.
RA_ROWS = [
    (8, 1, 3, 1, 0.442), (4, 2, 3, 2, 0.3536), (2, 3, 4, 3, 0.3536), (1, 4, 4, 4, 0.68),
    (3, 4, 4, 4, 0.68), (6, 3, 3, 3, 0.3536), (5, 4, 4, 4, 0.68), (7, 4, 4, 4, 0.68),
]
LD_ROWS = [(1, 3, 4, 3, 0.4624), (2, 2, 4, 2, 0.4624), (3, 3, 4, 3, 0.4624), (4, 1, 4, 1, 0.578)]
FITTED_C = (4.180, 2.905, 1.892, 1.020)


def rows_of(structure):
    return [(s.poc, s.level, s.ref_num, s.qp_offset, s.lambda_weight) for s in structure.slots]


class TestStructures:
    def test_ra_table(self):
        ra = build_structure("RA")
        assert ra.gop_length == 8
        assert rows_of(ra) == RA_ROWS
        assert [s.decode_index for s in ra.slots] == list(range(1, 9))

    @pytest.mark.parametrize("kind", ["LDP", "LDB"])
    def test_ld_table(self, kind):
        ld = build_structure(kind)
        assert ld.gop_length == 4
        assert rows_of(ld) == LD_ROWS
        assert [s.level for s in ld.slots] == [3, 2, 3, 1]

    def test_ra_first_slot(self):
        s = build_structure("RA").slots[0]
        assert (s.decode_index, s.poc, s.level, s.qp_offset, s.lambda_weight) == (1, 8, 1, 1, 0.442)

    def test_ld_fourth_slot(self):
        s = build_structure("LDP").slots[3]
        assert (s.decode_index, s.poc, s.level, s.qp_offset, s.lambda_weight) == (4, 4, 1, 1, 0.578)

    def test_ra_has_four_level4_slots(self):
        assert sorted(s.poc for s in build_structure("RA").slots if s.level == 4) == [1, 3, 5, 7]

    def test_pure_constant(self):
        assert build_structure("RA") == build_structure("RA")
        assert build_structure("RA").to_dict() == build_structure(StructureKind.RA).to_dict()

    def test_pocs_cover_gop(self):
        for kind in StructureKind:
            st_ = build_structure(kind)
            assert sorted(s.poc for s in st_.slots) == list(range(1, st_.gop_length + 1))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            build_structure("XYZ")

    def test_omega_defaults(self):
        assert default_omega("RA") == RA_OMEGA == {1: 1.0, 2: 2.5, 3: 4.5, 4: 10.0}
        assert default_omega("LDB") == LD_OMEGA == {1: 1.0, 2: 4.0, 3: 5.0}


class TestInit:
    def test_ra_level1(self):
        c = init_coefficients("RA", 0.1)[1]
        assert c.alpha == pytest.approx(4.4 * 4.2 / 3)
        assert c.alpha == pytest.approx(6.16)
        assert c.gamma == pytest.approx(0.007)
        assert c.beta == INIT_BETA == -1.35 and c.decay == 1.0

    def test_ra_level4(self):
        c = init_coefficients("RA", 0.1)[4]
        assert c.alpha == pytest.approx(1.4667, abs=1e-4)
        assert c.gamma == pytest.approx(0.0016667, abs=1e-7)

    def test_gamma_clamp(self):
        assert init_coefficients("RA", 0.02)[2].gamma == pytest.approx(0.002)

    @pytest.mark.parametrize("kind", ["LDP", "LDB"])
    def test_ld(self, kind):
        table = init_coefficients(kind, 0.1)
        assert sorted(table.coefficients) == [1, 2, 3]
        for c in table.coefficients.values():
            assert (c.alpha, c.beta, c.gamma, c.decay) == (2.4, -1.35, 0.005, 1.0)

    def test_rejects_nonpositive_target(self):
        with pytest.raises(ValueError):
            init_coefficients("RA", 0.0)

    @given(st.floats(0.07, 5.0))  # gamma cap inactive
    def test_ra_ratio_homogeneity(self, target):
        t = init_coefficients("RA", target)
        for i in range(1, 5):
            for j in range(1, 5):
                assert t[i].alpha / t[j].alpha == pytest.approx(t[i].gamma / t[j].gamma, rel=1e-12)
                assert t[i].beta == t[j].beta

    @given(st.sampled_from(list(StructureKind)), st.floats(1e-4, 5.0))
    def test_gamma_never_exceeds_cap(self, kind, target):
        for c in init_coefficients(kind, target).coefficients.values():
            assert c.gamma <= GAMMA_CAP_FRACTION * target * (1 + 1e-12)

    def test_copy_is_independent(self):
        t = init_coefficients("RA", 0.1)
        u = t.copy()
        u[1] = init_coefficients("RA", 0.01)[1]
        assert t[1] != u[1]


class TestEfficiencyCheck:
    def test_fitted_c_ratio(self):
        m = level_efficiency_check(FITTED_C)
        assert m[3][0] == pytest.approx(4.180 / 1.020)
        assert m[3][0] == pytest.approx(4.098, abs=1e-3)

    def test_identical(self):
        m = level_efficiency_check([2.0, 2.0, 2.0])
        assert all(v == 1.0 for row in m for v in row)

    def test_needs_two(self):
        with pytest.raises(ValueError):
            level_efficiency_check([1.0])

    def test_recovered_from_virtual_encoder(self):
        base = RdGroundTruth(3.0, 1.0, 0.01, 0.1)
        ratios = {1: 4.2 / 3, 2: 1.0, 3: 2 / 3, 4: 1 / 3}
        fitted = [fit_proposed(curve_samples(base.scaled(ratios[lv]))).c for lv in (1, 2, 3, 4)]
        m = level_efficiency_check(fitted)
        for i in range(4):
            for j in range(4):
                want = ratios[j + 1] / ratios[i + 1]
                assert m[i][j] == pytest.approx(want, rel=0.10)
