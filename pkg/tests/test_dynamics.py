"""Plant models: arm closed forms, task-space maps, contact, integration."""

import math

import numpy as np
import pytest

from fractal_impedance import (
    ContactWall,
    IntegrationBlowupError,
    PerturbationProfile,
    PlanarArm,
    PointMassPlant,
    Pulse,
    SingularConfigurationError,
    arm_dynamics,
    contact_force,
    external_wrench,
    forward_kinematics,
    joint_positions,
    kinetic_energy,
    potential_energy,
    step_plant,
    task_space_quantities,
)

RNG = np.random.default_rng(7)


def random_arm_state(arm, scale_q=1.0, scale_qd=1.0):
    q = RNG.uniform(-scale_q, scale_q, 3)
    qd = RNG.uniform(-scale_qd, scale_qd, 3)
    return q, qd


class TestArmClosedForms:
    def test_jacobian_at_zero_pose(self):
        arm = PlanarArm.default()
        dyn = arm_dynamics(arm, np.zeros(3), np.zeros(3))
        assert np.allclose(dyn.jacobian[0], [0.0, 0.0, 0.0], atol=1e-15)
        assert np.allclose(dyn.jacobian[1], [3.0, 2.0, 1.0], atol=1e-15)

    def test_gravity_at_zero_pose(self):
        # torque of each link's weight about the joints for the horizontal arm
        arm = PlanarArm.default()
        dyn = arm_dynamics(arm, np.zeros(3), np.zeros(3))
        assert np.allclose(dyn.gravity, [44.145, 19.62, 4.905], atol=1e-12)

    def test_bias_vanishes_at_rest(self):
        arm = PlanarArm.default()
        q = np.array([0.3, 0.9, 0.9])
        dyn = arm_dynamics(arm, q, np.zeros(3))
        assert np.allclose(dyn.bias, 0.0, atol=1e-15)
        assert np.allclose(dyn.coriolis, 0.0, atol=1e-15)

    def test_mass_matrix_spd(self):
        arm = PlanarArm.default()
        for _ in range(20):
            q, qd = random_arm_state(arm, scale_q=math.pi)
            m = arm_dynamics(arm, q, qd).mass_matrix
            assert np.allclose(m, m.T, atol=1e-13)
            assert np.min(np.linalg.eigvalsh(m)) > 0.0

    def test_mdot_minus_two_coriolis_skew(self):
        arm = PlanarArm.default()
        h = 1e-6
        for _ in range(10):
            q, qd = random_arm_state(arm, scale_q=math.pi)
            dyn = arm_dynamics(arm, q, qd)
            m_plus = arm_dynamics(arm, q + h * qd, qd).mass_matrix
            m_minus = arm_dynamics(arm, q - h * qd, qd).mass_matrix
            mdot = (m_plus - m_minus) / (2 * h)
            s = mdot - 2.0 * dyn.coriolis
            assert np.max(np.abs(s + s.T)) < 1e-6

    def test_jacobian_matches_finite_differences(self):
        arm = PlanarArm.default()
        h = 1e-7
        for _ in range(10):
            q, qd = random_arm_state(arm, scale_q=math.pi)
            jac = arm_dynamics(arm, q, qd).jacobian
            fd = np.zeros((2, 3))
            for j in range(3):
                dq = np.zeros(3)
                dq[j] = h
                fd[:, j] = (
                    forward_kinematics(arm, q + dq) - forward_kinematics(arm, q - dq)
                ) / (2 * h)
            assert np.max(np.abs(jac - fd)) < 1e-6

    def test_jacobian_dot_matches_finite_differences(self):
        arm = PlanarArm.default()
        h = 1e-5
        for _ in range(10):
            q, qd = random_arm_state(arm, scale_q=math.pi)
            jd = arm_dynamics(arm, q, qd).jacobian_dot
            j_plus = arm_dynamics(arm, q + h * qd, qd).jacobian
            j_minus = arm_dynamics(arm, q - h * qd, qd).jacobian
            fd = (j_plus - j_minus) / (2 * h)
            assert np.max(np.abs(jd - fd)) < 1e-4

    def test_bias_equals_coriolis_times_velocity(self):
        arm = PlanarArm.default()
        for _ in range(10):
            q, qd = random_arm_state(arm, scale_q=math.pi)
            dyn = arm_dynamics(arm, q, qd)
            assert np.allclose(dyn.bias, dyn.coriolis @ qd, atol=1e-12)


class TestKinematics:
    def test_stretched_pose(self):
        arm = PlanarArm.default()
        assert np.allclose(forward_kinematics(arm, np.zeros(3)), [3.0, 0.0], atol=1e-15)

    def test_joint_positions_chain(self):
        arm = PlanarArm.default()
        pts = joint_positions(arm, np.zeros(3))
        assert np.allclose(pts, [[0, 0], [1, 0], [2, 0], [3, 0]], atol=1e-15)

    def test_right_angle_pose(self):
        arm = PlanarArm.default()
        q = np.array([math.pi / 2, 0.0, 0.0])
        assert np.allclose(forward_kinematics(arm, q), [0.0, 3.0], atol=1e-12)


class TestEnergyBookkeeping:
    def test_kinetic_energy_is_quadratic_form(self):
        arm = PlanarArm.default()
        q, qd = random_arm_state(arm)
        m = arm_dynamics(arm, q, qd).mass_matrix
        assert kinetic_energy(arm, q, qd) == pytest.approx(0.5 * qd @ m @ qd, rel=1e-12)

    def test_potential_energy_zero_without_gravity(self):
        arm = PlanarArm.default(gravity=(0.0, 0.0))
        q, _ = random_arm_state(arm)
        assert potential_energy(arm, q) == 0.0

    def test_free_swing_conserves_energy(self):
        # no gravity, no torque: total energy drift must stay tiny over 10 s
        arm = PlanarArm.default(gravity=(0.0, 0.0))
        arm.q = np.array([0.3, 0.9, 0.9])
        arm.qdot = np.array([0.5, -0.4, 0.8])
        e0 = kinetic_energy(arm, arm.q, arm.qdot)
        plant = arm
        tau = np.zeros(3)
        for _ in range(10000):
            plant = step_plant(plant, tau, 1e-3, integrator="rk4")
        e1 = kinetic_energy(plant, plant.q, plant.qdot)
        assert abs(e1 - e0) / e0 < 1e-6


class TestTaskSpace:
    def test_nullspace_annihilates_task_acceleration(self):
        arm = PlanarArm.default()
        for _ in range(20):
            q, qd = random_arm_state(arm, scale_q=1.2)
            q = q + 0.3  # keep clear of the stretched singularity
            dyn = arm_dynamics(arm, q, np.zeros(3))
            ts = task_space_quantities(arm, q, dyn=dyn)
            tau = RNG.uniform(-5, 5, 3)
            resid = dyn.jacobian @ np.linalg.solve(dyn.mass_matrix, ts.nullspace @ tau)
            assert np.linalg.norm(resid) < 1e-10

    def test_lambda_symmetric_positive(self):
        arm = PlanarArm.default()
        q = np.array([0.3, 0.9, 0.9])
        ts = task_space_quantities(arm, q)
        assert np.allclose(ts.lam, ts.lam.T, atol=1e-12)
        assert np.min(np.linalg.eigvalsh(ts.lam)) > 0.0

    def test_singular_configuration_reported(self):
        # fully stretched arm: the x row of J is identically zero
        arm = PlanarArm.default()
        with pytest.raises(SingularConfigurationError) as e:
            task_space_quantities(arm, np.zeros(3))
        assert e.value.smallest_singular_value < 1e-8


class TestStepPlant:
    def test_requires_positive_dt(self):
        plant = PointMassPlant(inertia=(1.0,), x=(0.0,), xdot=(0.0,))
        with pytest.raises(ValueError):
            step_plant(plant, np.zeros(1), 0.0)

    def test_rejects_unknown_integrator(self):
        plant = PointMassPlant(inertia=(1.0,), x=(0.0,), xdot=(0.0,))
        with pytest.raises(ValueError):
            step_plant(plant, np.zeros(1), 1e-3, integrator="euler")

    def test_harmonic_oscillator_accuracy(self):
        # unit mass, force -x, from (1, 0): x(t) = cos t, so x(pi/2) = 0
        plant = PointMassPlant(inertia=(1.0,), x=(1.0,), xdot=(0.0,))
        dt = math.pi / 2 / 2000
        force = lambda pos, vel: -pos
        for _ in range(2000):
            plant = step_plant(plant, force, dt, integrator="rk4")
        assert abs(plant.x[0]) <= 1e-6

    def test_semi_implicit_stays_bounded(self):
        plant = PointMassPlant(inertia=(1.0,), x=(1.0,), xdot=(0.0,))
        force = lambda pos, vel: -pos
        for _ in range(5000):
            plant = step_plant(plant, force, 1e-2, integrator="semi_implicit")
        e = 0.5 * plant.xdot[0] ** 2 + 0.5 * plant.x[0] ** 2
        assert 0.3 < e < 0.7

    def test_constant_force_point_mass(self):
        plant = PointMassPlant(inertia=(2.0,), x=(0.0,), xdot=(0.0,))
        plant = step_plant(plant, np.array([4.0]), 0.5)
        # a = 2, x = a t^2 / 2 = 0.25, v = 1 for the exact quadratic
        assert plant.x[0] == pytest.approx(0.25, rel=1e-12)
        assert plant.xdot[0] == pytest.approx(1.0, rel=1e-12)

    def test_blowup_reports_time(self):
        plant = PointMassPlant(inertia=(1.0,), x=(1.0,), xdot=(0.0,))
        force = lambda pos, vel: pos * 1e200
        with np.errstate(over="ignore"), pytest.raises(IntegrationBlowupError) as e:
            p = plant
            for _ in range(50):
                p = step_plant(p, force, 1.0)
        assert e.value.time >= 0.0

    def test_arm_step_advances_state(self):
        arm = PlanarArm.default(gravity=(0.0, 0.0))
        arm.q = np.array([0.3, 0.9, 0.9])
        arm.qdot = np.zeros(3)
        out = step_plant(arm, np.array([1.0, 0.0, 0.0]), 1e-2)
        assert out is not arm
        assert out.qdot[0] > 0.0


class TestContactWall:
    def test_penetration_force(self):
        wall = ContactWall(axis=0, offset=0.5, stiffness=1e4)
        f = contact_force(wall, np.array([0.51, 0.0]), np.zeros(2))
        assert f[0] == pytest.approx(-100.0, rel=1e-12)
        assert f[1] == 0.0

    def test_no_force_outside(self):
        wall = ContactWall(axis=0, offset=0.5, stiffness=1e4)
        f = contact_force(wall, np.array([0.49, 0.0]), np.zeros(2))
        assert np.all(f == 0.0)

    def test_non_adhesive_clamp(self):
        # damping pulling the mass back in may not create a sticking force
        wall = ContactWall(axis=0, offset=0.5, stiffness=1e4, damping=1e6)
        f = contact_force(wall, np.array([0.501, 0.0]), np.array([-1.0, 0.0]))
        assert f[0] == 0.0

    def test_reversed_direction_wall(self):
        wall = ContactWall(axis=1, offset=-0.2, stiffness=1e3, direction=-1)
        f = contact_force(wall, np.array([0.0, -0.21]), np.zeros(2))
        assert f[1] == pytest.approx(10.0, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            ContactWall(axis=0, offset=0.0, stiffness=-1.0)
        with pytest.raises(ValueError):
            ContactWall(axis=0, offset=0.0, stiffness=1.0, direction=2)


class TestPerturbations:
    def test_pulse_window(self):
        prof = PerturbationProfile(
            n_dof=2, pulses=(Pulse(start=1.0, duration=0.5, wrench=(3.0, 0.0)),)
        )
        assert np.allclose(external_wrench(prof, 1.2), [3.0, 0.0])
        assert np.allclose(external_wrench(prof, 0.9), [0.0, 0.0])
        assert np.allclose(external_wrench(prof, 1.6), [0.0, 0.0])

    def test_end_property(self):
        p = Pulse(start=1.0, duration=0.5, wrench=(1.0,))
        assert p.end == pytest.approx(1.5)

    def test_same_axis_overlap_rejected(self):
        with pytest.raises(ValueError):
            PerturbationProfile(
                n_dof=1,
                pulses=(
                    Pulse(start=1.0, duration=0.5, wrench=(1.0,)),
                    Pulse(start=1.2, duration=0.5, wrench=(2.0,)),
                ),
            )

    def test_disjoint_axes_may_overlap(self):
        prof = PerturbationProfile(
            n_dof=2,
            pulses=(
                Pulse(start=1.0, duration=0.5, wrench=(1.0, 0.0)),
                Pulse(start=1.2, duration=0.5, wrench=(0.0, 2.0)),
            ),
        )
        assert np.allclose(external_wrench(prof, 1.3), [1.0, 2.0])

    def test_wrench_length_checked(self):
        with pytest.raises(ValueError):
            PerturbationProfile(
                n_dof=2, pulses=(Pulse(start=0.0, duration=0.1, wrench=(1.0,)),)
            )


class TestPlantValidation:
    def test_point_mass_requires_positive_inertia(self):
        with pytest.raises(ValueError):
            PointMassPlant(inertia=(0.0,), x=(0.0,), xdot=(0.0,))

    def test_point_mass_dim_consistency(self):
        with pytest.raises(ValueError):
            PointMassPlant(inertia=(1.0, 1.0), x=(0.0,), xdot=(0.0, 0.0))

    def test_arm_requires_consistent_link_counts(self):
        with pytest.raises(ValueError):
            PlanarArm(
                lengths=(1.0, 1.0),
                masses=(1.0, 1.0, 1.0),
                com_offsets=(0.5, 0.5, 0.5),
                inertias=(0.1, 0.1, 0.1),
                gravity=(0.0, -9.81),
                q=np.zeros(3),
                qdot=np.zeros(3),
            )
