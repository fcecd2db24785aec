use std::sync::Arc;

use proptest::prelude::*;
use spme_core::reference::{lp_spacetime_error, BarenblattParams, ErrorRules};
use spme_core::noise::noise_load;
use spme_core::stepper::InitialCondition;
use spme_core::{Assembler, BasisCoefficients, Grid, IncrementTable, NoiseModel, QuadratureRule, Scheme, SchemeConfig};

fn barenblatt_error(j: usize, n: usize) -> f64 {
    let grid = Grid::new(1.5, j, 1).unwrap();
    let traj = Scheme::new(&grid, SchemeConfig::new(0.1, n, 3.0)).unwrap().run_path(0).unwrap();
    let params = BarenblattParams::unit(3.0, 1).unwrap();
    let rules = ErrorRules::tabulated(1);
    let asm = Assembler::new(&grid, rules.space);
    lp_spacetime_error(&asm, &traj, |t, x| params.value(t, x).unwrap(), 3.0, 0.01, 0.1, &rules.time)
}

#[test]
fn barenblatt_error_drops_under_refinement() {
    let e: Vec<f64> = [(16, 32), (32, 64), (64, 128)].iter().map(|&(j, n)| barenblatt_error(j, n)).collect();
    assert!(e[1] < 0.7 * e[0] && e[2] < 0.7 * e[1], "{e:?}");
}

#[test]
fn heat_scheme_is_linear_in_the_datum() {
    let grid = Grid::new(1.5, 16, 2).unwrap();
    let a: Vec<f64> = (0..256).map(|i| ((i * 37 % 11) as f64 - 5.0) * 1e-2).collect();
    let b: Vec<f64> = (0..256).map(|i| ((i * 13 % 7) as f64) * 1e-2).collect();
    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let run = |v: &[f64]| {
        let init = InitialCondition::Coefficients(BasisCoefficients::from_vec(&grid, v.to_vec()).unwrap());
        let s = Scheme::new(&grid, SchemeConfig::new(0.05, 5, 2.0).with_initial(init)).unwrap();
        s.run_path(0).unwrap().state(5).values().to_vec()
    };
    let (ra, rb, rs) = (run(&a), run(&b), run(&sum));
    for i in 0..256 {
        assert!((ra[i] + rb[i] - rs[i]).abs() < 1e-10);
    }
}

#[test]
fn linear_noise_step_matches_a_hand_built_right_hand_side() {
    let grid = Grid::new(1.5, 16, 1).unwrap();
    let tau = 0.1 / 4.0;
    let table = IncrementTable::from_rows(tau, 1, vec![0.0, 0.3, -0.2, 0.1]).unwrap();
    let cfg = SchemeConfig::new(0.1, 4, 3.0).with_noise(NoiseModel::Linear { amplitude: 0.5 });
    let scheme = Scheme::new(&grid, cfg).unwrap();
    let traj = scheme.run_with_increments(&table).unwrap();
    // σ(u) = a u, so the noise load is a Δβ M uⁿ⁻¹
    let zero = vec![0.0; 16];
    let mut u = traj.state(0).clone();
    for n in 1..=4 {
        let s: Vec<f64> = scheme.mass().matvec(u.values()).iter().map(|v| 0.5 * table.row(n)[0] * v).collect();
        u = scheme.step(&u, &zero, &s).unwrap();
        for (x, y) in u.values().iter().zip(traj.state(n).values()) {
            assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }
}

#[test]
fn forcing_enters_as_a_psi_load() {
    let grid = Grid::new(1.5, 8, 1).unwrap();
    let f = Arc::new(|t: f64, x: &[f64]| t * (1.0 + x[0]));
    let cfg = SchemeConfig::new(0.1, 2, 3.0).with_forcing(f);
    let scheme = Scheme::new(&grid, cfg).unwrap();
    let asm = Assembler::new(&grid, QuadratureRule::gauss_legendre(3));
    let load = scheme.forcing_load(2);
    // the load is linear in t, so τ·ψ-load at one time fixes every step
    let expected = asm.psi_load(&|x: &[f64]| 1.0 + x[0]);
    let ratio = load[3] / expected[3];
    for (a, b) in load.iter().zip(&expected) {
        assert!((a - ratio * b).abs() <= 1e-12 * b.abs().max(1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nonlinear_term_is_monotone(
        a in proptest::collection::vec(-2.0f64..2.0, 16),
        b in proptest::collection::vec(-2.0f64..2.0, 16),
        p in 2.0f64..4.0,
    ) {
        let grid = Grid::new(1.5, 16, 1).unwrap();
        let asm = Assembler::new(&grid, QuadratureRule::gauss_legendre(3));
        let ka = asm.nonlinear_term(&BasisCoefficients::from_vec(&grid, a.clone()).unwrap(), p);
        let kb = asm.nonlinear_term(&BasisCoefficients::from_vec(&grid, b.clone()).unwrap(), p);
        let pairing: f64 = (0..16).map(|i| (ka[i] - kb[i]) * (a[i] - b[i])).sum();
        prop_assert!(pairing >= -1e-12);
    }

    #[test]
    fn every_step_solves_its_equation(seed in 0u64..1000, amp in 0.0f64..1.0) {
        let grid = Grid::new(1.5, 16, 1).unwrap();
        let noise = NoiseModel::Linear { amplitude: amp };
        let cfg = SchemeConfig::new(0.1, 8, 3.0).with_noise(noise.clone());
        let scheme = Scheme::new(&grid, cfg).unwrap();
        let table = scheme.increments(seed).unwrap();
        let traj = scheme.run_with_increments(&table).unwrap();
        let (asm, mass, tau) = (scheme.assembler(), scheme.mass(), scheme.tau());
        for n in 1..=8 {
            let prev = traj.state(n - 1);
            let u = traj.state(n);
            let s = noise_load(&noise, asm, mass, prev, table.row(n)).unwrap();
            let rhs: Vec<f64> = mass.matvec(prev.values()).iter().zip(&s).map(|(a, b)| a + b).collect();
            let k = asm.nonlinear_term(u, 3.0);
            let mu = mass.matvec(u.values());
            let res = (0..16).map(|i| (mu[i] + tau * k[i] - rhs[i]).powi(2)).sum::<f64>().sqrt();
            let scale = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(res <= 1e-9 * scale, "step {n}: {res} vs {scale}");
        }
    }
}
