//! Frozen reference values for the five benchmark loops, computed with an
//! independent double-precision prototype, plus grid-refinement checks.

use reset_verdict::hbeta::{self, HBetaProblem};
use reset_verdict::nsv::{self, FrequencyGrid};
use reset_verdict::{DemoSystem, ScanSpec, SystemDescription};

struct Frozen {
    m: (f64, f64),
    q: (f64, f64),
    delta1: f64,
    psi1: f64,
    theta: (f64, f64),
    ratio: (f64, f64),
}

const FROZEN: [Frozen; 5] = [
    Frozen {
        m: (279.228, 6944.96),
        q: (80.9058, 256.279),
        delta1: 0.342961,
        psi1: 1.42319,
        theta: (-18.9300, 125.094),
        ratio: (0.702639, 2.91579),
    },
    Frozen {
        m: (495.170, 7090.80),
        q: (80.6866, 369.911),
        delta1: 0.186306,
        psi1: 0.609089,
        theta: (-10.5535, 148.655),
        ratio: (1.64180, 5.36763),
    },
    Frozen {
        m: (630.237, 7225.54),
        q: (81.1956, 399.023),
        delta1: 0.141109,
        psi1: 0.471619,
        theta: (-8.03191, 154.751),
        ratio: (2.12036, 7.08694),
    },
    Frozen {
        m: (686.579, 7354.44),
        q: (81.8512, 388.005),
        delta1: 0.125807,
        psi1: 0.455376,
        theta: (-7.17053, 155.517),
        ratio: (2.19597, 7.94871),
    },
    Frozen {
        m: (718.603, 7488.69),
        q: (82.6696, 368.073),
        delta1: 0.115036,
        psi1: 0.442479,
        theta: (-6.56223, 156.132),
        ratio: (2.25996, 8.69339),
    },
];

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

#[test]
fn sets_and_ratios_match_frozen_values() {
    for (demo, f) in DemoSystem::ALL.iter().zip(&FROZEN) {
        let report = nsv::theorem1_verdict(&demo.system(), &FrequencyGrid::default()).unwrap();
        let s = report.sets.as_ref().unwrap();
        assert_eq!(s.m_set.len(), 2, "{demo}");
        assert_eq!(s.q_set.len(), 2, "{demo}");
        for (got, want) in [
            (s.m_set[0], f.m.0),
            (s.m_set[1], f.m.1),
            (s.q_set[0], f.q.0),
            (s.q_set[1], f.q.1),
        ] {
            assert!(close(got, want, 1e-5), "{demo}: crossing {got} vs {want}");
        }
        assert!(close(s.delta1.unwrap(), f.delta1, 1e-4), "{demo}: δ1 {:?}", s.delta1);
        assert!(close(s.psi1.unwrap(), f.psi1, 1e-4), "{demo}: Ψ1 {:?}", s.psi1);
        assert!((s.theta1.to_degrees() - f.theta.0).abs() < 1e-3, "{demo}");
        assert!((s.theta2.to_degrees() - f.theta.1).abs() < 1e-3, "{demo}");
        assert!(report.type_i() && !report.type_ii());
    }
}

#[test]
fn ratio_intervals_match_frozen_values() {
    for (demo, f) in DemoSystem::ALL.iter().zip(&FROZEN) {
        let region = hbeta::scan_system(&demo.system(), &ScanSpec::default()).unwrap();
        let iv = region.ratio_interval.unwrap();
        assert!(close(iv.min, f.ratio.0, 1e-5), "{demo}: {}", iv.min);
        assert!(close(iv.max, f.ratio.1, 1e-5), "{demo}: {}", iv.max);
        // the scan's feasible cells sit inside the bisected interval
        for p in region.feasible_points.iter().filter(|p| p.beta > 0.0) {
            let r = p.rho_prime / p.beta;
            assert!(r > iv.min * (1.0 - 1e-6) && r < iv.max * (1.0 + 1e-6), "{demo}: {r}");
        }
    }
}

#[test]
fn refining_the_grid_leaves_results_stable() {
    for demo in DemoSystem::ALL {
        let sys = demo.system();
        let coarse = nsv::theorem1_verdict(&sys, &FrequencyGrid::default()).unwrap();
        let fine = nsv::theorem1_verdict(&sys, &FrequencyGrid::default().refined(4)).unwrap();
        let (a, b) = (coarse.sets.unwrap(), fine.sets.unwrap());
        assert!((a.theta1 - b.theta1).to_degrees().abs() < 0.5, "{demo}");
        assert!((a.theta2 - b.theta2).to_degrees().abs() < 0.5, "{demo}");
        assert!(close(a.delta1.unwrap(), b.delta1.unwrap(), 0.005), "{demo}");
        assert!(close(a.psi1.unwrap(), b.psi1.unwrap(), 0.005), "{demo}");
        assert_eq!(coarse.verdict, fine.verdict);
    }
}

#[test]
fn feasible_points_survive_a_denser_frequency_grid() {
    for demo in [DemoSystem::C1, DemoSystem::C5] {
        let sys = demo.system();
        let region = hbeta::scan_system(&sys, &ScanSpec::default()).unwrap();
        let dense = HBetaProblem::new(&sys, 10 * hbeta::DEFAULT_POINTS_PER_DECADE).unwrap();
        let pts = &region.feasible_points;
        assert!(!pts.is_empty());
        let step = (pts.len() / 200).max(1);
        for p in pts.iter().step_by(step) {
            assert!(dense.feasible(*p), "{demo}: {p:?}");
        }
    }
}

#[test]
fn system_json_round_trip_is_byte_identical() {
    for demo in DemoSystem::ALL {
        let text = serde_json::to_string(&demo.system()).unwrap();
        let back: SystemDescription = serde_json::from_str(&text).unwrap();
        assert_eq!(back, demo.system());
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}
