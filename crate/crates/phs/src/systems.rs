//! Bundled benchmark systems: a controlled rigid body, a controlled
//! pendulum, a capacitor microphone, and small helper systems for tests and
//! the benchmark driver.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::splitting::SplittingSpec;
use crate::system::{
    constant_matrix, ControlLaw, Matrix, PortHamiltonianSystem, StateVector, Vector,
};

/// A ready-to-run closed-loop setup.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: &'static str,
    pub system: PortHamiltonianSystem,
    pub law: ControlLaw,
    pub x0: StateVector,
}

/// `sin(z)/z`, stable near zero.
fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Controlled planar pendulum.
///
/// `H = p^2/2 + 1 - cos q`, canonical structure, force port on the momentum,
/// damping injection `u = -0.01 atan(y)` with `y = p`.
pub fn pendulum() -> Experiment {
    let j = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let g = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let system = PortHamiltonianSystem::builder(2, 1)
        .hamiltonian(|x: &Vector| 0.5 * x[1] * x[1] + 1.0 - x[0].cos())
        .gradient(|x: &Vector| Vector::from_row_slice(&[x[0].sin(), x[1]]))
        .structure(constant_matrix(j))
        .input_matrix(constant_matrix(g))
        .averaged_gradient(|x: &Vector, xp: &Vector| {
            // Chord average of (sin q, p) in closed form:
            //   int sin = sin(mean) * sinc(half gap),  int p = mean.
            let mean_q = 0.5 * (x[0] + xp[0]);
            let half_gap = 0.5 * (xp[0] - x[0]);
            Vector::from_row_slice(&[mean_q.sin() * sinc(half_gap), 0.5 * (x[1] + xp[1])])
        })
        .build()
        .expect("valid pendulum");
    Experiment {
        name: "pendulum",
        system,
        law: ControlLaw::output_feedback(|y: &Vector| y.map(|v| 0.01 * v.atan())),
        x0: StateVector::from_slice(&[2.8, 1.4]).expect("finite"),
    }
}

/// Parameters of the controlled rigid body.
#[derive(Debug, Clone)]
pub struct RigidBodyParams {
    /// Principal moments of inertia.
    pub inertia: [f64; 3],
    /// Diagonal derivative gain.
    pub k_d: [f64; 3],
    /// 3x4 proportional gain on the attitude block.
    pub k_p: Matrix,
    /// Initial angular velocity.
    pub omega0: [f64; 3],
    /// Initial attitude quaternion (scalar first).
    pub q0: [f64; 4],
}

impl Default for RigidBodyParams {
    fn default() -> Self {
        Self {
            inertia: [1.0, 2.0, 3.0],
            k_d: [3.0, 4.0, 5.0],
            k_p: Matrix::from_row_slice(
                3,
                4,
                &[
                    3.0, 0.0, 0.0, 1.0, //
                    0.0, 5.0, 0.0, 1.0, //
                    0.0, 0.0, 6.0, 1.0,
                ],
            ),
            omega0: [1.0, -1.5, 2.0],
            q0: [0.5, 0.5, 0.5, 0.5],
        }
    }
}

fn hat(v0: f64, v1: f64, v2: f64) -> Matrix {
    Matrix::from_row_slice(3, 3, &[0.0, -v2, v1, v2, 0.0, -v0, -v1, v0, 0.0])
}

/// Controlled rigid body spinning about its center of mass.
///
/// State `(m, q)` with `m` the body angular momentum and `q` the attitude
/// quaternion (scalar entry first, constant along the flow). In these
/// variables the structure matrix is skew without a mass factor:
///
/// ```text
///   H = m^T I^{-1} m / 2 + q^T q / 2,
///   B = blkdiag(hat(m), blkdiag(0, hat(I^{-1} m))),   G = [I3; 0].
/// ```
///
/// The feedback `u = -K_d m - K_p q` shapes both spin and attitude. The same
/// dynamics written with angular velocity and an inertia mass matrix are
/// available from [`rigid_body_velocity_form`]; the two produce identical
/// discrete-gradient trajectories.
pub fn rigid_body(params: RigidBodyParams) -> Experiment {
    let inertia = params.inertia;
    let g = {
        let mut g = Matrix::zeros(7, 3);
        g[(0, 0)] = 1.0;
        g[(1, 1)] = 1.0;
        g[(2, 2)] = 1.0;
        g
    };
    let k_d = params.k_d;
    let k_p = params.k_p.clone();
    let grad = move |x: &Vector| {
        Vector::from_row_slice(&[
            x[0] / inertia[0],
            x[1] / inertia[1],
            x[2] / inertia[2],
            x[3],
            x[4],
            x[5],
            x[6],
        ])
    };
    let grad_for_avg = grad;
    let system = PortHamiltonianSystem::builder(7, 3)
        .hamiltonian(move |x: &Vector| {
            0.5 * (x[0] * x[0] / inertia[0] + x[1] * x[1] / inertia[1] + x[2] * x[2] / inertia[2])
                + 0.5 * (x[3] * x[3] + x[4] * x[4] + x[5] * x[5] + x[6] * x[6])
        })
        .gradient(grad)
        .structure(move |x: &Vector| {
            let mut b = Matrix::zeros(7, 7);
            b.view_mut((0, 0), (3, 3)).copy_from(&hat(x[0], x[1], x[2]));
            let omega = hat(x[0] / inertia[0], x[1] / inertia[1], x[2] / inertia[2]);
            b.view_mut((4, 4), (3, 3)).copy_from(&omega);
            b
        })
        .input_matrix(constant_matrix(g))
        .averaged_gradient(move |x: &Vector, xp: &Vector| {
            // Quadratic Hamiltonian: the chord average is the midpoint value.
            grad_for_avg(&((x + xp) * 0.5))
        })
        .build()
        .expect("valid rigid body");
    let law = ControlLaw::state_feedback(move |x: &Vector| {
        let m = x.rows(0, 3);
        let q = x.rows(3, 4);
        let mut u = Vector::zeros(3);
        for i in 0..3 {
            u[i] = -k_d[i] * m[i];
        }
        u - &k_p * q
    });
    let m0: Vec<f64> = (0..3).map(|i| inertia[i] * params.omega0[i]).collect();
    let x0 = StateVector::from_slice(&[
        m0[0],
        m0[1],
        m0[2],
        params.q0[0],
        params.q0[1],
        params.q0[2],
        params.q0[3],
    ])
    .expect("finite");
    Experiment {
        name: "rigid-body",
        system,
        law,
        x0,
    }
}

/// The rigid body in angular-velocity variables with the inertia tensor kept
/// as a mass matrix on the left-hand side.
///
/// Same physics as [`rigid_body`]; useful for exercising the mass-matrix
/// path of the steppers.
pub fn rigid_body_velocity_form(params: RigidBodyParams) -> Experiment {
    let inertia = params.inertia;
    let g = {
        let mut g = Matrix::zeros(7, 3);
        g[(0, 0)] = 1.0;
        g[(1, 1)] = 1.0;
        g[(2, 2)] = 1.0;
        g
    };
    let k_d = params.k_d;
    let k_p = params.k_p.clone();
    let mut mass = Matrix::identity(7, 7);
    for i in 0..3 {
        mass[(i, i)] = inertia[i];
    }
    let grad = move |x: &Vector| {
        Vector::from_row_slice(&[
            inertia[0] * x[0],
            inertia[1] * x[1],
            inertia[2] * x[2],
            x[3],
            x[4],
            x[5],
            x[6],
        ])
    };
    let grad_for_avg = grad;
    let system = PortHamiltonianSystem::builder(7, 3)
        .hamiltonian(move |x: &Vector| {
            0.5 * (inertia[0] * x[0] * x[0] + inertia[1] * x[1] * x[1] + inertia[2] * x[2] * x[2])
                + 0.5 * (x[3] * x[3] + x[4] * x[4] + x[5] * x[5] + x[6] * x[6])
        })
        .gradient(grad)
        .structure(move |x: &Vector| {
            let mut b = Matrix::zeros(7, 7);
            b.view_mut((0, 0), (3, 3))
                .copy_from(&(-hat(x[0], x[1], x[2])));
            b.view_mut((4, 4), (3, 3)).copy_from(&hat(x[0], x[1], x[2]));
            b
        })
        .input_matrix(constant_matrix(g))
        .mass_matrix(mass)
        .averaged_gradient(move |x: &Vector, xp: &Vector| grad_for_avg(&((x + xp) * 0.5)))
        .build()
        .expect("valid rigid body");
    let law = ControlLaw::state_feedback(move |x: &Vector| {
        let q = x.rows(3, 4);
        let mut u = Vector::zeros(3);
        for i in 0..3 {
            u[i] = -k_d[i] * inertia[i] * x[i];
        }
        u - &k_p * q
    });
    let x0 = StateVector::from_slice(&[
        params.omega0[0],
        params.omega0[1],
        params.omega0[2],
        params.q0[0],
        params.q0[1],
        params.q0[2],
        params.q0[3],
    ])
    .expect("finite");
    Experiment {
        name: "rigid-body-velocity",
        system,
        law,
        x0,
    }
}

/// Splitting of the rigid body into exactly solvable flows.
///
/// The conservative part composes the three planar momentum rotations (each
/// one the exact flow of the single-axis structure term) in a palindromic
/// order, so it conserves the energy exactly. The second part carries pure
/// damping `u = -K_d m`, whose flow is an elementwise exponential decay.
/// With `with_damping = false` the second flow is the identity.
pub fn rigid_body_splitting(params: &RigidBodyParams, with_damping: bool) -> Result<SplittingSpec> {
    let inertia = params.inertia;
    let axis_flow = move |k: usize, t: f64, z: &mut Vector| {
        let a = (k + 1) % 3;
        let b = (k + 2) % 3;
        // Momentum block: elliptic rotation about axis k.
        let theta = z[k] * t / (inertia[a] * inertia[b]).sqrt();
        let r = (inertia[a] / inertia[b]).sqrt();
        let (s, c) = theta.sin_cos();
        let (ma, mb) = (z[a], z[b]);
        z[a] = ma * c - r * mb * s;
        z[b] = mb * c + ma / r * s;
        // Quaternion vector block: plain rotation about axis k.
        let phi = z[k] / inertia[k] * t;
        let (s, c) = phi.sin_cos();
        let (va, vb) = (z[4 + a], z[4 + b]);
        z[4 + a] = va * c - vb * s;
        z[4 + b] = vb * c + va * s;
    };
    let flow1 = move |t: f64, x: &Vector| {
        let mut z = x.clone();
        axis_flow(0, 0.5 * t, &mut z);
        axis_flow(1, 0.5 * t, &mut z);
        axis_flow(2, t, &mut z);
        axis_flow(1, 0.5 * t, &mut z);
        axis_flow(0, 0.5 * t, &mut z);
        z
    };
    let k_d = params.k_d;
    let flow2 = move |t: f64, x: &Vector| {
        if !with_damping {
            return x.clone();
        }
        let mut z = x.clone();
        for i in 0..3 {
            z[i] *= (-k_d[i] * t).exp();
        }
        z
    };
    SplittingSpec::strang(flow1, flow2)
}

/// Parameters of the capacitor microphone.
#[derive(Debug, Clone, Copy)]
pub struct MicrophoneParams {
    /// Circuit resistance.
    pub resistance: f64,
    /// Damping constant of the plate spring.
    pub damping: f64,
    /// Plate mass.
    pub mass: f64,
    /// Spring rest position.
    pub rest_position: f64,
    /// Initial state `(q, p, Q)`.
    pub x0: [f64; 3],
}

impl Default for MicrophoneParams {
    fn default() -> Self {
        Self {
            resistance: 100.0,
            damping: 0.1,
            mass: 4.0,
            rest_position: 3.0,
            x0: [1.0, 0.0, 2.0],
        }
    }
}

/// Capacitor microphone with mechanical and resistive dissipation.
///
/// `H = p^2/(2m) + (q - qbar)^2/2 + q Q^2 / 2`; the structure matrix carries
/// the damping terms on its diagonal, so it splits as `B = J + S` with
/// `S = diag(0, -c, -1/R)`. The input feeds the momentum and the charge
/// through `G = [0, 1, 1/R]^T`, closed by `u = -cbrt(y)/2`.
pub fn microphone(params: MicrophoneParams) -> Experiment {
    let MicrophoneParams {
        resistance,
        damping,
        mass,
        rest_position,
        x0,
    } = params;
    let full = Matrix::from_row_slice(
        3,
        3,
        &[
            0.0,
            1.0,
            0.0, //
            -1.0,
            -damping,
            0.0, //
            0.0,
            0.0,
            -1.0 / resistance,
        ],
    );
    let skew = Matrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let g = Matrix::from_row_slice(3, 1, &[0.0, 1.0, 1.0 / resistance]);
    let grad = move |x: &Vector| {
        Vector::from_row_slice(&[
            x[0] - rest_position + 0.5 * x[2] * x[2],
            x[1] / mass,
            x[0] * x[2],
        ])
    };
    let grad_for_avg = grad;
    let system = PortHamiltonianSystem::builder(3, 1)
        .hamiltonian(move |x: &Vector| {
            0.5 * x[1] * x[1] / mass
                + 0.5 * (x[0] - rest_position) * (x[0] - rest_position)
                + 0.5 * x[0] * x[2] * x[2]
        })
        .gradient(grad)
        .structure_with_dissipation(constant_matrix(full), constant_matrix(skew))
        .input_matrix(constant_matrix(g))
        .averaged_gradient(move |x: &Vector, xp: &Vector| {
            // Cubic Hamiltonian: Simpson's rule averages the gradient exactly.
            let mid = (x + xp) * 0.5;
            (grad_for_avg(x) + grad_for_avg(&mid) * 4.0 + grad_for_avg(xp)) / 6.0
        })
        .build()
        .expect("valid microphone");
    Experiment {
        name: "microphone",
        system,
        law: ControlLaw::output_feedback(|y: &Vector| y.map(|v| 0.5 * v.cbrt())),
        x0: StateVector::from_slice(&x0).expect("finite"),
    }
}

/// Unit harmonic oscillator with a force port on the momentum.
pub fn harmonic_oscillator() -> Experiment {
    oscillator_with_stiffness(1.0)
}

/// Harmonic oscillator `H = p^2/2 + k q^2/2`.
pub fn oscillator_with_stiffness(k: f64) -> Experiment {
    let j = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let g = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let system = PortHamiltonianSystem::builder(2, 1)
        .hamiltonian(move |x: &Vector| 0.5 * (x[1] * x[1] + k * x[0] * x[0]))
        .gradient(move |x: &Vector| Vector::from_row_slice(&[k * x[0], x[1]]))
        .structure(constant_matrix(j))
        .input_matrix(constant_matrix(g))
        .averaged_gradient(move |x: &Vector, xp: &Vector| {
            Vector::from_row_slice(&[0.5 * k * (x[0] + xp[0]), 0.5 * (x[1] + xp[1])])
        })
        .build()
        .expect("valid oscillator");
    Experiment {
        name: "oscillator",
        system,
        law: ControlLaw::Zero,
        x0: StateVector::from_slice(&[1.0, 0.0]).expect("finite"),
    }
}

/// Random constant-structure linear system: `H = x^T P x / 2` with `P`
/// positive definite, `B` skew and `G` dense, all drawn from a seeded
/// generator. The law is a linear damping `u = -y/10`.
pub fn random_linear_phs(seed: u64, state_dim: usize, port_dim: usize) -> Experiment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw =
        |rows: usize, cols: usize| DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
    let a = draw(state_dim, state_dim);
    let b = &a - a.transpose();
    let r = draw(state_dim, state_dim);
    let p = &r * r.transpose() / state_dim as f64 + Matrix::identity(state_dim, state_dim) * 0.5;
    let g = draw(state_dim, port_dim);
    let x0 = DVector::from_fn(state_dim, |i, _| ((i + 1) as f64 * 0.37).sin());

    let p_for_h = p.clone();
    let p_for_grad = p.clone();
    let p_for_avg = p.clone();
    let system = PortHamiltonianSystem::builder(state_dim, port_dim)
        .hamiltonian(move |x: &Vector| 0.5 * x.dot(&(&p_for_h * x)))
        .gradient(move |x: &Vector| &p_for_grad * x)
        .structure(constant_matrix(b))
        .input_matrix(constant_matrix(g))
        .averaged_gradient(move |x: &Vector, xp: &Vector| &p_for_avg * ((x + xp) * 0.5))
        .build()
        .expect("valid linear system");
    Experiment {
        name: "linear",
        system,
        law: ControlLaw::output_feedback(|y: &Vector| y * 0.1),
        x0: StateVector::new(x0).expect("finite"),
    }
}

/// Degenerate system isolating the quadrature condition of one-step methods:
/// `H = p - F(q)`, Darboux structure, identity input matrix and a constant
/// open-loop forcing on the momentum. The flow is `q' = 1`,
/// `p' = f(q) + u_bar` with `f = F'`.
pub fn quadrature_probe_system<F, Df>(f_antiderivative: F, f: Df, u_bar: f64) -> Experiment
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
    Df: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let f = Arc::new(f);
    let f_grad = f.clone();
    let darboux = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let system = PortHamiltonianSystem::builder(2, 2)
        .hamiltonian(move |x: &Vector| x[1] - f_antiderivative(x[0]))
        .gradient(move |x: &Vector| Vector::from_row_slice(&[-f_grad(x[0]), 1.0]))
        .structure(constant_matrix(darboux))
        .input_matrix(constant_matrix(Matrix::identity(2, 2)))
        .build()
        .expect("valid probe system");
    Experiment {
        name: "quadrature-probe",
        system,
        law: ControlLaw::open_loop(move |_t| Vector::from_row_slice(&[0.0, u_bar])),
        x0: StateVector::from_slice(&[0.0, 0.0]).expect("finite"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disgrad::{verify_properties, DiscreteGradientScheme};
    use crate::integrators::{integrate, step_avfphs, Method};
    use crate::solver::StepperConfig;
    use approx::assert_relative_eq;

    #[test]
    fn bundled_defaults_match_the_documented_setups() {
        // Field-for-field check of the benchmark parameters.
        let rb = RigidBodyParams::default();
        assert_eq!(rb.inertia, [1.0, 2.0, 3.0]);
        assert_eq!(rb.k_d, [3.0, 4.0, 5.0]);
        let expected_kp = Matrix::from_row_slice(
            3,
            4,
            &[3.0, 0.0, 0.0, 1.0, 0.0, 5.0, 0.0, 1.0, 0.0, 0.0, 6.0, 1.0],
        );
        assert_eq!(rb.k_p, expected_kp);

        let mic = MicrophoneParams::default();
        assert_eq!(mic.resistance, 100.0);
        assert_eq!(mic.damping, 0.1);
        assert_eq!(mic.mass, 4.0);
        assert_eq!(mic.rest_position, 3.0);

        let pend = pendulum();
        assert_eq!(pend.x0.as_vector().as_slice(), &[2.8, 1.4]);
        let y = Vector::from_row_slice(&[1.4]);
        let u = pend.law.input(0.0, &Vector::zeros(2), &y);
        assert_relative_eq!(u[0], -0.01 * 1.4_f64.atan(), epsilon = 1e-16);
    }

    #[test]
    fn pendulum_closed_form_average_matches_quadrature() {
        let exp = pendulum();
        let rule = crate::quadrature::QuadratureRule::gauss_legendre(12).unwrap();
        for (a, b) in [(0.3, 2.1), (-1.0, -0.99999), (2.0, 2.0), (-3.0, 4.0)] {
            let x = Vector::from_row_slice(&[a, 0.2]);
            let xp = Vector::from_row_slice(&[b, -0.7]);
            let closed = exp.system.averaged_gradient().unwrap()(&x, &xp);
            let quad = crate::disgrad::avf_gradient(|z| exp.system.gradient(z), &x, &xp, &rule);
            assert_relative_eq!((closed - quad).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn microphone_closed_form_average_is_exact() {
        let exp = microphone(MicrophoneParams::default());
        let pairs = vec![
            (
                Vector::from_row_slice(&[2.0, -1.0, 0.5]),
                Vector::from_row_slice(&[4.0, 2.0, -1.5]),
            ),
            (
                Vector::from_row_slice(&[3.0, 0.0, 0.0]),
                Vector::from_row_slice(&[1.0, 1.0, 1.0]),
            ),
        ];
        let res =
            verify_properties(&DiscreteGradientScheme::AvfClosedForm, &exp.system, &pairs).unwrap();
        assert!(res.chain_rule <= 1e-13);
        assert!(res.consistency <= 1e-13);
    }

    #[test]
    fn momentum_and_velocity_forms_step_identically() {
        // Same physics, two formulations: trajectories must coincide after
        // converting angular velocity to momentum.
        let params = RigidBodyParams::default();
        let momentum = rigid_body(params.clone());
        let velocity = rigid_body_velocity_form(params.clone());
        let cfg = StepperConfig::new(0.5)
            .with_tolerance(1e-15)
            .with_max_iterations(300);
        let mut zm = momentum.x0.as_vector().clone();
        let mut zv = velocity.x0.as_vector().clone();
        for _ in 0..40 {
            zm = step_avfphs(&momentum.system, &momentum.law, 0.0, &zm, &cfg)
                .unwrap()
                .0;
            zv = step_avfphs(&velocity.system, &velocity.law, 0.0, &zv, &cfg)
                .unwrap()
                .0;
            let mut zv_as_momentum = zv.clone();
            for i in 0..3 {
                zv_as_momentum[i] *= params.inertia[i];
            }
            assert!(
                (zm.clone() - &zv_as_momentum).amax() <= 1e-10 * (1.0 + zm.amax()),
                "formulations diverged"
            );
        }
    }

    #[test]
    fn rigid_body_quaternion_norm_is_preserved_by_the_midpoint_structure() {
        let exp = rigid_body(RigidBodyParams::default());
        let cfg = StepperConfig::new(0.5)
            .with_tolerance(1e-14)
            .with_max_iterations(300);
        let traj = integrate(&Method::AvfPhs, &exp.system, &exp.law, &exp.x0, 60, &cfg).unwrap();
        let norm0: f64 = exp.x0.as_vector().rows(3, 4).norm();
        for r in &traj.records {
            let drift = (r.state.as_vector().rows(3, 4).norm() - norm0).abs();
            assert!(drift <= 1e-12, "quaternion norm drift {drift}");
        }
    }

    #[test]
    fn probe_system_flow_is_affine_in_time() {
        let exp = quadrature_probe_system(|q| q * q, |q| 2.0 * q, 0.3);
        let f = exp
            .system
            .vector_field(
                &Vector::from_row_slice(&[1.0, 2.0]),
                &Vector::from_row_slice(&[0.0, 0.3]),
            )
            .unwrap();
        assert_relative_eq!(f[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(f[1], 2.0 + 0.3, epsilon = 1e-15);
    }

    #[test]
    fn bundled_outputs_vanish_at_the_origin() {
        for exp in [
            pendulum(),
            rigid_body(RigidBodyParams::default()),
            microphone(MicrophoneParams::default()),
        ] {
            let zero = Vector::zeros(exp.system.state_dim());
            assert_eq!(
                exp.system.output(&zero).unwrap().norm(),
                0.0,
                "{}",
                exp.name
            );
        }
    }

    #[test]
    fn random_linear_phs_is_reproducible_and_skew() {
        let a = random_linear_phs(11, 4, 2);
        let b = random_linear_phs(11, 4, 2);
        let x = Vector::from_row_slice(&[0.1, -0.2, 0.3, 0.4]);
        assert_eq!(a.system.hamiltonian(&x), b.system.hamiltonian(&x));
        let bm = a.system.structure(&x);
        assert!((&bm + bm.transpose()).norm() <= 1e-14);
        // P positive definite: H > 0 away from the origin.
        assert!(a.system.hamiltonian(&x) > 0.0);
    }
}
