use std::f64::consts::PI;

use resonf::adapt::{
    adapted_expansion, enclosed_action, fit_circularization, naff_decompose, AdaptedChart,
};
use resonf::birkhoff;
use resonf::dynamics::integrate_poly;
use resonf::hambuild::{
    build_expansion, diagonalize, find_equilibrium, resonant_chart_for, to_resonant_average,
    ExpansionCaps, OrbitalConfig,
};
use resonf::kolmogorov::KolmogorovState;
use resonf::pseries::{CartPoly, C64};

fn wrap(a: f64) -> f64 {
    a.sin().atan2(a.cos())
}

fn solve4(c: &[[f64; 4]; 4], b: [f64; 4]) -> [f64; 4] {
    let mut m = [[0.0f64; 5]; 4];
    for i in 0..4 {
        m[i][..4].copy_from_slice(&c[i]);
        m[i][4] = b[i];
    }
    for col in 0..4 {
        let piv = (col..4).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, piv);
        for row in 0..4 {
            if row == col {
                continue;
            }
            let f = m[row][col] / m[col][col];
            for k in col..5 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    [m[0][4] / m[0][0], m[1][4] / m[1][1], m[2][4] / m[2][2], m[3][4] / m[3][3]]
}

fn main() {
    let cfg = OrbitalConfig::hd60532();
    let (expansion, _) = build_expansion(&cfg, &ExpansionCaps::default()).unwrap();
    let chart = resonant_chart_for(&cfg);
    let (averaged, _) = to_resonant_average(&expansion, &chart).unwrap();
    let p_star = find_equilibrium(&averaged, &chart, [1.5e-3, -2.5e-4]).unwrap();
    let model = diagonalize(&averaged, &chart, p_star, 8).unwrap();
    let h_sqrt = model.hamiltonian.to_sqrt_series(8).unwrap();
    let nf = birkhoff::normalize(&h_sqrt, 3, 1e-10).unwrap();
    let h6 = nf.hamiltonian().with_cap(6);

    let pchart = cfg.poincare_chart();
    let pts = [
        pchart.from_elements(&cfg, 0, &cfg.initial_elements(0)),
        pchart.from_elements(&cfg, 1, &cfg.initial_elements(1)),
    ];
    let (p4, q4) = chart.from_poincare(&pts);
    let lin = [p4[0] - p_star[0], p4[1] - p_star[1], wrap(q4[0] - PI), wrap(q4[1] - PI)];
    let z0 = solve4(&model.c_matrix, lin);
    let zpoly = CartPoly::from_sqrt_series(&nf.normal, 8).unwrap();

    for scale in [0.5f64, 0.35, 0.25, 0.15] {
        println!("================ scale {scale} ================");
        let zs = [z0[0] * scale, z0[1] * scale, z0[2] * scale, z0[3] * scale];
        let zr = nf.chain.backward(zs).unwrap();

        let n = 8192usize;
        let t_span = 24.0 * 2.0 * PI / nf.omega[0].abs();
        let dt = t_span / n as f64;
        let (traj, drift) = integrate_poly(&zpoly, zr, t_span, dt, 1e-11).unwrap();
        println!("drift = {drift:e}");

        let signal: Vec<C64> =
            (0..traj.len()).map(|i| C64::new(traj.state(i)[0], traj.state(i)[2])).collect();
        let dec = naff_decompose(&signal, dt, 5).unwrap();
        println!("nu1 = {}", dec.nu1);
        for c in &dec.components {
            println!(
                "  comp: freq {:+.6}  amp {:.5e}  phase {:+.3}  k {:?}",
                c.freq, c.amplitude, c.phase, c.k
            );
        }
        let (x1_star, alpha) = fit_circularization(&dec).unwrap();
        println!("x1_star = {x1_star}, alpha = {alpha}");

        let circ = |s: &[f64]| [alpha * s[0], (s[2] - x1_star) / alpha];
        let period_samples = (2.0 * PI / dec.nu1 / dt).round() as usize;
        let first = circ(traj.state(0));
        let best = (period_samples.saturating_sub(80)..period_samples + 80)
            .min_by(|&a, &b| {
                let da = circ(traj.state(a));
                let db = circ(traj.state(b));
                let ra = (da[0] - first[0]).hypot(da[1] - first[1]);
                let rb = (db[0] - first[0]).hypot(db[1] - first[1]);
                ra.total_cmp(&rb)
            })
            .unwrap();
        let curve: Vec<[f64; 2]> = (0..=best).map(|i| circ(traj.state(i))).collect();
        let gap = {
            let l = curve.last().unwrap();
            (l[0] - first[0]).hypot(l[1] - first[1])
        };
        println!("period_samples {period_samples}, best {best}, closure gap {gap:e}");
        let p1_star = enclosed_action(&curve).unwrap();
        let j2_star = {
            let s = traj.state(0);
            (s[1] * s[1] + s[3] * s[3]) / 2.0
        };
        println!("p1_star = {p1_star}, j2_star = {j2_star}");

        // counter-rotating fraction before/after circularizing
        let csig: Vec<C64> = (0..traj.len())
            .map(|i| {
                let c = circ(traj.state(i));
                C64::new(c[0], c[1])
            })
            .collect();
        let cdec = naff_decompose(&csig, dt, 5).unwrap();
        let frac = |d: &resonf::adapt::NaffDecomposition| {
            let a = |k: i32| {
                d.components
                    .iter()
                    .find(|c| c.k == k)
                    .map(|c| c.amplitude)
                    .unwrap_or(0.0)
            };
            a(1) / a(-1)
        };
        println!("counter-rotating fraction: raw {:.4}, circ {:.4}", frac(&dec), frac(&cdec));

        let swing = |f: &dyn Fn(&[f64]) -> f64| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..=best {
                let v = f(traj.state(i));
                lo = lo.min(v);
                hi = hi.max(v);
            }
            hi - lo
        };
        let sraw = swing(&|s: &[f64]| (s[0] * s[0] + s[2] * s[2]) / 2.0);
        let scirc = swing(&|s: &[f64]| {
            let c = circ(s);
            (c[0] * c[0] + c[1] * c[1]) / 2.0
        });
        println!("raw swing {sraw:.4e}; circ swing {scirc:.4e}; gain {:.4}", 1.0 - scirc / sraw);

        let ch = AdaptedChart::new(alpha, x1_star, p1_star, j2_star).unwrap();
        let adapted = adapted_expansion(&h6, &ch, 2, 18).unwrap();
        let s0 = KolmogorovState::from_hamiltonian(&adapted).unwrap();
        let pert: f64 =
            (1..=9u32).map(|c| s0.container(0, c).norm() + s0.container(1, c).norm()).sum();
        println!("omega0 = {:?}, pert = {pert:.3e}", s0.omega);
        let mut st = s0;
        match st.normalize(9, 1e-7) {
            Ok(()) => {
                for r in &st.ledger {
                    println!(
                        "  step {}: chi0 {:.3e} chi1 {:.3e} rem {:.3e} omega {:?}",
                        r.step, r.chi0_norm, r.chi1_norm, r.remainder_norm, r.omega
                    );
                }
                println!(
                    "omega9 = {:?} vs nu1-based {:.6}; rel {:.4}",
                    st.omega,
                    -dec.nu1,
                    ((st.omega[0] + dec.nu1) / dec.nu1).abs()
                );
            }
            Err(e) => println!("  normalize failed: {e}"),
        }
    }
}
