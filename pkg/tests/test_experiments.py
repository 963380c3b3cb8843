import json

import numpy as np
import pytest

from geoqsl import experiments
from geoqsl.dynamics import EngineConfig
from geoqsl.experiments import LengthReport, PhysicsViolation, check_inequalities
from geoqsl.model import QutritFamily

SQRT2 = np.sqrt(2.0)


@pytest.fixture(scope="module")
def ho():
    return experiments.run_ho_linear(1.0)


@pytest.fixture(scope="module")
def qubit():
    return experiments.run_qubit(np.pi / 4, -0.5, 0.4, 1.4778)


@pytest.fixture(scope="module")
def squeezed():
    return experiments.run_squeezed(fock_check=True)


class TestHarmonicOscillator:
    def test_fs_units(self, ho):
        assert ho.l_E == pytest.approx(SQRT2, abs=1e-6)
        assert ho.l_g_control == pytest.approx(np.pi / SQRT2, abs=1e-6)
        assert ho.final_fidelity >= 1 - 1e-10

    def test_lambda_plane(self, ho):
        assert ho.extras["l_E_lambda_plane"] == pytest.approx(2.0, abs=1e-6)
        assert ho.extras["l_g_control_lambda_plane"] == pytest.approx(np.pi, abs=1e-6)

    def test_ratio(self, ho):
        assert ho.l_E / ho.l_g_control == pytest.approx(2 / np.pi, abs=1e-8)

    def test_ratio_independent_of_omega(self, ho):
        fast = experiments.run_ho_linear(5.0)
        assert fast.l_E / fast.l_g_control == pytest.approx(2 / np.pi, abs=1e-8)
        assert fast.l_E == pytest.approx(ho.l_E, abs=1e-8)

    def test_verdicts(self, ho):
        assert ho.original_conjecture_violated
        assert ho.modified_inequality_holds
        assert ho.saturated
        assert any("saturated" in n for n in ho.notes)

    def test_state_stays_on_real_axis(self, ho):
        assert ho.extras["max_deviation_from_real_axis"] < 1e-9
        np.testing.assert_allclose(ho.extras["final_mu"], [2.0, 0.0], atol=1e-9)


class TestQubit:
    def test_reference_values(self, qubit):
        assert qubit.l_E == pytest.approx(0.81, abs=0.02)
        assert qubit.l_g_control == pytest.approx(np.pi / (2 * SQRT2), abs=1e-6)
        assert qubit.l_g_control == pytest.approx(1.1107, abs=1e-4)
        assert qubit.original_conjecture_violated
        assert qubit.modified_inequality_holds

    def test_line_element_agrees(self, qubit):
        assert qubit.extras["l_E_line_element"] == pytest.approx(qubit.l_E, abs=1e-6)

    def test_auto_hold_time(self):
        rep = experiments.run_qubit(np.pi / 4, -0.5, 0.4)
        assert rep.extras["T"] == pytest.approx(1.4778, abs=1e-3)
        assert rep.extras["T_auto"]
        assert rep.final_fidelity >= 1 - 1e-8

    def test_mirror_symmetry(self):
        fam = experiments.qubit_family(np.pi / 4, -0.5)
        rep = experiments.run_qubit(np.pi / 4, -0.5, 0.4)
        defect = experiments.qubit_mirror_defect(fam, rep.trajectory, 0.4, rep.extras["T"])
        assert defect < 1e-6

    def test_s_to_zero_closed_form(self):
        assert experiments.qubit_s_to_zero_length(np.pi / 4) == pytest.approx(0.8273, abs=1e-4)

    def test_s_sweep_approaches_limit(self):
        limit = experiments.qubit_s_to_zero_length(np.pi / 4)
        gaps = [abs(experiments.run_qubit(np.pi / 4, -0.5, s).l_E - limit) for s in (0.1, 0.05, 0.025)]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-3

    @pytest.mark.parametrize("s", [0.2, 0.4])
    def test_great_circle_has_no_violation(self, s):
        rep = experiments.run_qubit(np.pi / 2, -0.5, s)
        assert not rep.original_conjecture_violated
        assert rep.l_E >= rep.l_g_control - 1e-6

    def test_hamiltonian_path_not_shorter(self, qubit):
        assert qubit.l_g_hamiltonian_path >= qubit.l_g_control - 1e-6

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            experiments.run_qubit(0.0)
        with pytest.raises(ValueError):
            experiments.run_qubit(np.pi / 4, s=-0.1)
        with pytest.raises(ValueError):
            experiments.qubit_family(np.pi / 4, 1.0, "other")


class TestQubitAdiabatic:
    def test_slow_smooth_traversal_approaches_l_g(self):
        gaps = [abs(experiments.run_qubit_adiabatic(total_time=t).l_E - np.pi / (2 * SQRT2)) for t in (10, 40, 160)]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 0.03

    def test_verdicts(self):
        rep = experiments.run_qubit_adiabatic(total_time=40)
        assert rep.modified_inequality_holds
        assert rep.final_fidelity > 0.99


class TestSqueezed:
    def test_published_formula(self, squeezed):
        assert squeezed.extras["l_g_published_formula"] == pytest.approx(97.49, abs=0.01)

    def test_metric_arc(self, squeezed):
        assert squeezed.l_g_control == pytest.approx(20.21, abs=0.01)
        assert squeezed.l_g_control == pytest.approx(2 * np.pi / 3 * np.sinh(4) / (2 * SQRT2), rel=1e-8)

    def test_hamiltonian_path_twice_geodesic(self, squeezed):
        assert squeezed.l_g_hamiltonian_path / squeezed.l_g_control == pytest.approx(2.0, abs=1e-3)

    def test_metric_verdict(self, squeezed):
        assert squeezed.l_E < squeezed.l_g_control
        assert squeezed.original_conjecture_violated
        assert squeezed.modified_inequality_holds

    def test_mirror_symmetry(self, squeezed):
        assert squeezed.extras["mirror_symmetry_defect"] < 1e-6

    def test_fock_oracle(self, squeezed):
        assert squeezed.extras["l_E_fock_rel_diff"] < 1e-4
        assert squeezed.extras["fock_engine_fidelity"] >= 1 - 1e-8

    def test_discrepancy_note(self, squeezed):
        assert any("discrepancy" in n for n in squeezed.notes)
        assert squeezed.extras["l_E_published"] == 42.24

    def test_disk_distance_bounds_l_E(self, squeezed):
        assert squeezed.d_lower == pytest.approx(2.72679518215, abs=1e-9)
        assert squeezed.l_E > squeezed.d_lower

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            experiments.run_squeezed(r=0.0)


class TestQutrit:
    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0, 5.0])
    def test_closed_forms(self, lam):
        rep = experiments.run_qutrit(2.0, 1.0, lam)
        forms = experiments.qutrit_closed_forms(2.0, lam)
        assert rep.l_g_control == pytest.approx(forms["l_g"], abs=1e-6)
        assert rep.l_E == pytest.approx(forms["l_E"], abs=1e-6)
        assert rep.final_fidelity >= 1 - 1e-9

    def test_reference_l_g(self):
        rep = experiments.run_qutrit(2.0, 1.0, SQRT2)
        assert rep.l_g_control == pytest.approx(np.pi * SQRT2 / 4, abs=1e-9)

    def test_closed_forms_at_zero(self):
        assert experiments.qutrit_closed_forms(2.0, 0.0) == {"l_g": 0.0, "l_E": 0.0}

    def test_closed_forms_limit(self):
        forms = experiments.qutrit_closed_forms(2.0, 1e8)
        assert forms["l_g"] == pytest.approx(np.pi / SQRT2, abs=1e-7)
        assert forms["l_E"] == pytest.approx(np.pi / SQRT2, abs=1e-7)

    def test_l_g_approach_rate(self):
        # l_g = pi/sqrt2 - omega/lambda* + O(lambda*^-3)
        forms = experiments.qutrit_closed_forms(2.0, 1e3)
        assert np.pi / SQRT2 - forms["l_g"] == pytest.approx(2e-3, rel=1e-5)

    def test_symmetric_case_has_no_crossing(self):
        assert experiments.qutrit_critical_scan(2.0, 1.0, np.linspace(0.25, 20, 80)) is None

    def test_asymmetric_case_crosses(self):
        crit = experiments.qutrit_critical_scan(2.0, 1.5, np.linspace(0.25, 20, 80))
        assert crit is not None and crit > 0
        fam = QutritFamily(2.0, 1.5)
        below = experiments.qutrit_l_g(fam, crit - 0.01) - experiments.qutrit_l_E(fam, crit - 0.01)
        above = experiments.qutrit_l_g(fam, crit + 0.01) - experiments.qutrit_l_E(fam, crit + 0.01)
        assert below < 0 < above
        rep = experiments.run_qutrit(2.0, 1.5, 2 * crit)
        assert rep.l_g_control > rep.l_E

    def test_asymptotic_slope(self):
        slope = experiments.qutrit_asymptotic_slope(2.0, 0.01)
        assert slope == pytest.approx(5 / (6 * SQRT2), rel=0.05)

    def test_static_formula_matches_simulation(self):
        rep = experiments.run_qutrit(2.0, 1.5, 1.3)
        assert rep.extras["l_E_static_formula"] == pytest.approx(rep.l_E, abs=1e-9)

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            experiments.qutrit_critical_scan(2.0, 1.5, [1.0, 0.5])
        with pytest.raises(ValueError):
            experiments.qutrit_closed_forms(-1.0, 1.0)


class TestInequalities:
    def _report(self, l_E, l_g, d):
        return LengthReport("t", l_E, l_g, l_g, d, 1.0)

    def test_examples(self, ho, qubit):
        v = check_inequalities(ho)
        assert v.modified_inequality_holds and not v.original_conjecture_holds and v.saturated
        v = check_inequalities(qubit)
        assert v.modified_inequality_holds and not v.original_conjecture_holds and not v.saturated

    def test_trivial_zero_length(self):
        v = check_inequalities(self._report(0.0, 0.0, 0.0))
        assert v.modified_inequality_holds and v.original_conjecture_holds

    def test_tolerance_edges(self):
        assert check_inequalities(self._report(1.0, 1.0 + 9e-7, 1.0)).original_conjecture_holds
        assert not check_inequalities(self._report(1.0, 1.0 + 2e-6, 1.0)).original_conjecture_holds
        assert not check_inequalities(self._report(1.0, 2.0, 1.0 + 2e-6)).modified_inequality_holds

    def test_violation_raises(self):
        with pytest.raises(PhysicsViolation):
            experiments._finalize(self._report(1.0, 2.0, 1.5))


class TestReports:
    @pytest.mark.parametrize(
        "run",
        [
            lambda: experiments.run_ho_linear(1.0),
            lambda: experiments.run_qubit(np.pi / 4, -0.5, 0.4),
            lambda: experiments.run_squeezed(),
            lambda: experiments.run_qutrit(2.0, 1.5, 2.0),
        ],
        ids=["ho", "qubit", "squeezed", "qutrit"],
    )
    def test_deterministic_json(self, run):
        assert run().to_json() == run().to_json()

    def test_json_fields(self, qubit):
        d = json.loads(qubit.to_json())
        for key in ("l_E", "l_g_control", "l_g_hamiltonian_path", "d_lower", "final_fidelity",
                    "original_conjecture_violated", "modified_inequality_holds", "notes", "config"):
            assert key in d
        assert "trajectory" not in d

    def test_engine_config_recorded(self):
        rep = experiments.run_qutrit(2.0, 1.0, 1.0, config=EngineConfig(min_steps=64))
        assert rep.config["engine"]["min_steps"] == 64
