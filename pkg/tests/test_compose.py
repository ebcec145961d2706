import numpy as np
import pytest

from netcert.blackbox import TOPOLOGY_KINDS, Topology
from netcert.compose import (
    ClassCertificate,
    certify,
    class_margins,
    eval_network_certificate,
)
from netcert.core import InvariantError
from netcert.lipschitz import LipschitzConfig, estimate_for_class
from netcert.verify import phase_portrait

from tests.conftest import (
    ROOM_BETA,
    ROOM_COEFFS,
    ROOM_ETA,
    ROOM_L1,
    ROOM_L2,
    ROOM_PHI,
    ROOM_SIGMA,
    ROOM_THETA,
)


def make_class_certificate(margins, class_id="c", coeffs=(1.0, 0.0)):
    return ClassCertificate(
        class_id=class_id,
        template_exponents=((1,), (0,)),
        coeffs=tuple(coeffs),
        sigma=margins.sigma,
        phi=margins.phi,
        supply_s11=((0.0,),),
        supply_s12=((0.0,),),
        supply_s22=((0.0,),),
        eta=margins.eta,
        beta=margins.beta,
        l1=margins.l1,
        l2=margins.l2,
        theta=margins.theta,
        margins=margins,
        sample_count=100,
        grid_spec=((10,), (10,)),
    )


class TestMarginArithmetic:
    def test_room_values(self):
        m = class_margins(
            eta=ROOM_ETA, beta=ROOM_BETA, l1=ROOM_L1, l2=ROOM_L2, theta=ROOM_THETA
        )
        assert m.m1 == pytest.approx(-14.3770, abs=1e-3)
        assert m.m2 == pytest.approx(-15.4195, abs=1e-3)

    def test_vehicle_values(self):
        m = class_margins(eta=-0.4098, beta=0.0, l1=7.8288, l2=7.4875, theta=0.05)
        assert m.m1 == pytest.approx(-0.0184, abs=1e-3)
        assert m.m2 == pytest.approx(-0.0355, abs=1.5e-3)

    def test_all_zero_is_not_certified(self):
        m = class_margins(eta=0.0, beta=0.0, l1=0.0, l2=0.0, theta=0.0)
        assert m.m1 == 0.0 and m.m2 == 0.0 and m.gap == 0.0
        assert not m.satisfied  # the level gap must be strictly positive

    def test_recompute_is_bit_exact(self):
        m1 = class_margins(eta=-1.5, beta=0.25, l1=3.0, l2=2.0, theta=0.125, sigma=1.0, phi=2.0)
        m2 = class_margins(eta=-1.5, beta=0.25, l1=3.0, l2=2.0, theta=0.125, sigma=1.0, phi=2.0)
        assert m1.m1 == m2.m1 and m1.m2 == m2.m2 and m1.gap == m2.gap
        # same arithmetic done by hand, same binary result
        assert m1.m1 == -1.5 + 3.0 * 0.125
        assert m1.m2 == -1.5 + 0.25 + 2.0 * 0.125

    def test_input_validation(self):
        with pytest.raises(InvariantError):
            class_margins(eta=0.0, beta=0.0, l1=-1.0, l2=0.0, theta=0.1)
        with pytest.raises(InvariantError):
            class_margins(eta=0.0, beta=0.0, l1=0.0, l2=0.0, theta=-0.1)


class TestCertifyPolicy:
    def test_room_reference_numbers_certify(self):
        m = class_margins(
            eta=ROOM_ETA,
            beta=ROOM_BETA,
            l1=ROOM_L1,
            l2=ROOM_L2,
            theta=ROOM_THETA,
            sigma=ROOM_SIGMA,
            phi=ROOM_PHI,
            class_id="room",
        )
        cert = certify([make_class_certificate(m, "room")])
        assert cert.certified
        assert cert.failures == ()

    def test_positive_eta_fails_m1(self):
        m = class_margins(eta=0.1, beta=0.0, l1=0.0, l2=0.0, theta=0.0, sigma=0.0, phi=1.0)
        cert = certify([make_class_certificate(m)])
        assert not cert.certified
        assert ("c", "m1", pytest.approx(0.1)) in [
            (cid, cond, amt) for cid, cond, amt in cert.failures
        ]

    def test_no_cross_class_compensation(self):
        good = class_margins(eta=-1.0, beta=0.0, l1=0.0, l2=0.0, theta=0.0, sigma=0.0, phi=1.0)
        bad = class_margins(eta=0.5, beta=0.0, l1=0.0, l2=0.0, theta=0.0, sigma=0.0, phi=1.0)
        cert = certify(
            [make_class_certificate(good, "good"), make_class_certificate(bad, "bad")]
        )
        assert not cert.certified
        failing_ids = {cid for cid, _, _ in cert.failures}
        assert failing_ids == {"bad"}

    def test_verdict_monotone_in_dispersion(self):
        """Denser sampling (smaller theta) with unchanged solution values
        never flips certified to not-certified."""
        thetas = [0.2, 0.1, 0.05, 0.01]
        verdicts = []
        for t in thetas:
            m = class_margins(eta=-1.0, beta=0.1, l1=4.0, l2=4.0, theta=t, sigma=0.0, phi=1.0)
            verdicts.append(certify([make_class_certificate(m)]).certified)
        for coarse, fine in zip(verdicts, verdicts[1:]):
            assert fine >= coarse  # True never degrades to False

    def test_network_levels_scale_with_copies(self):
        m = class_margins(eta=-1.0, beta=0.0, l1=0.0, l2=0.0, theta=0.1, sigma=2.0, phi=3.0)
        cert = certify([make_class_certificate(m)], reference_size=10)
        assert cert.network_levels() == (20.0, 30.0)
        assert cert.network_levels({"c": 3}) == (6.0, 9.0)


class TestEvalNetworkCertificate:
    def _room_certificate(self):
        m = class_margins(
            eta=ROOM_ETA,
            beta=ROOM_BETA,
            l1=ROOM_L1,
            l2=ROOM_L2,
            theta=ROOM_THETA,
            sigma=ROOM_SIGMA,
            phi=ROOM_PHI,
            class_id="room",
        )
        cert = make_class_certificate(m, "room")
        cert = ClassCertificate(
            **{
                **cert.__dict__,
                "template_exponents": ((4,), (2,), (0,)),
                "coeffs": ROOM_COEFFS,
            }
        )
        return certify([cert])

    def test_three_rooms_at_eleven(self):
        cert = self._room_certificate()
        total = eval_network_certificate(cert, [np.array([11.0])] * 3)
        assert total == pytest.approx(3 * 135.6791, abs=1e-9)
        assert total == pytest.approx(407.0373, abs=1e-9)

    def test_empty_surrogate_is_zero(self):
        cert = self._room_certificate()
        assert eval_network_certificate(cert, []) == 0.0

    def test_single_subsystem_equals_template_eval(self):
        cert = self._room_certificate()
        total = eval_network_certificate(cert, [np.array([12.0])])
        assert total == pytest.approx(211.6136, abs=1e-9)


@pytest.fixture(scope="module")
def drift_certificate(drift_class, drift_samples, drift_solution):
    cfg = LipschitzConfig(gamma=0.2, inner_count=100, outer_count=20, seed=5)
    l1, l2 = estimate_for_class(drift_class, drift_solution, cfg)
    margins = class_margins(
        eta=drift_solution.eta,
        beta=drift_solution.beta,
        l1=l1.value,
        l2=l2.value,
        theta=drift_samples.dispersion,
        sigma=drift_solution.sigma,
        phi=drift_solution.phi,
        class_id="drift",
    )
    cert = ClassCertificate(
        class_id="drift",
        template_exponents=((1,), (0,)),
        coeffs=tuple(float(v) for v in drift_solution.coeffs.coeffs),
        sigma=drift_solution.sigma,
        phi=drift_solution.phi,
        supply_s11=((float(drift_solution.supply.s11[0, 0]),),),
        supply_s12=((float(drift_solution.supply.s12[0, 0]),),),
        supply_s22=((float(drift_solution.supply.s22[0, 0]),),),
        eta=drift_solution.eta,
        beta=drift_solution.beta,
        l1=l1.value,
        l2=l2.value,
        theta=drift_samples.dispersion,
        margins=margins,
        sample_count=drift_samples.count,
        grid_spec=drift_samples.grid_spec,
    )
    return certify([cert])


class TestCertifiedDriftClass:
    """End-to-end certified path on the synthetic strictly-decreasing class:
    the margins pass with honestly estimated constants, and the certified
    certificate is consistent with simulation."""
    def test_verdict_certified(self, drift_certificate):
        assert drift_certificate.certified
        assert drift_certificate.failures == ()

    def test_certified_implies_decreasing_and_safe(self, drift_class, drift_certificate):
        """Certified certificates must not increase along any surrogate
        trajectory and no state may enter the unsafe box."""
        for kind in TOPOLOGY_KINDS:
            topo = Topology(kind=kind, surrogate_size=10)
            portrait = phase_portrait(drift_class, topo, (5,), 100)
            assert portrait.unsafe_entries == 0
            for traj in portrait.trajectories:
                values = [
                    eval_network_certificate(drift_certificate, list(step_states))
                    for step_states in traj.states
                ]
                diffs = np.diff(values)
                assert np.all(diffs <= 1e-6)

    def test_margins_strictly_negative(self, drift_certificate):
        m = drift_certificate.classes[0].margins
        assert m.m1 < 0 and m.m2 < 0 and m.gap > 0


class TestCertifyValidation:
    def test_empty_input_rejected(self):
        with pytest.raises(InvariantError):
            certify([])

    def test_missing_class_lookup_raises(self):
        m = class_margins(eta=-1.0, beta=0.0, l1=0.0, l2=0.0, theta=0.1, sigma=0.0, phi=1.0)
        cert = certify([make_class_certificate(m, "present")])
        with pytest.raises(KeyError):
            cert.class_by_id("absent")

    def test_assignment_length_must_match(self):
        m = class_margins(eta=-1.0, beta=0.0, l1=0.0, l2=0.0, theta=0.1, sigma=0.0, phi=1.0)
        cert = certify([make_class_certificate(m, "c")])
        with pytest.raises(Exception):
            eval_network_certificate(cert, [np.array([1.0])], assignment=["c", "c"])
