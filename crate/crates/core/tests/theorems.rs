//! Companions to the acceptance criteria: the same guarantees checked on
//! the inputs where they are expected to hold exactly.

mod common;

use convergema::anchoring::AnchoringStrategy;
use convergema::convergence::{clevel, epsilon_sequence, normalize_threshold, ConditionKind, ProximityCondition};
use convergema::evalframe::{format2, performance, rc, round2};
use convergema::trace::LearningTrace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{capped, max_increase, near_ceiling, trace};

#[test]
fn look_ahead_ordering_holds_past_the_first_anchored_levels() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..6 {
        let (obs, limit) = if i % 2 == 0 {
            let (truth, obs) = near_ceiling(&mut rng, 80);
            (obs, truth.c)
        } else {
            capped(&mut rng, 80)
        };
        let la3 = trace(&obs, AnchoringStrategy::fixed_look_ahead(100.0, 3));
        let la0 = trace(&obs, AnchoringStrategy::fixed_look_ahead(100.0, 0));
        let p = la3.plevel().unwrap();
        for l in (p + 4)..=la3.last_level() {
            let d = |t: &LearningTrace| (t.effective_alpha(l).unwrap() - limit).abs();
            assert!(d(&la3) <= d(&la0) + 1e-6, "trace {i} level {l}: {} > {}", d(&la3), d(&la0));
        }
    }
}

#[test]
fn fixed_backbone_never_rises_on_increasing_logs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let (_, obs) = near_ceiling(&mut rng, 60);
        let t = trace(&obs, AnchoringStrategy::fixed(100.0));
        let omega = t.wlevel().unwrap();
        assert!(max_increase(&t.backbone(), omega + 1) <= 1e-9);
    }
}

#[test]
fn normalized_threshold_is_met_by_its_source_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for _ in 0..6 {
        let (_, obs) = near_ceiling(&mut rng, 120);
        let fixed = trace(&obs, AnchoringStrategy::fixed(100.0));
        let Ok(tau_a) = normalize_threshold(&fixed, 0.05) else { continue };
        let relative = clevel(&fixed, &ProximityCondition::relative(0.05)).unwrap().unwrap();
        let absolute = ProximityCondition::new(ConditionKind::Absolute, tau_a).unwrap();
        if let Some(stop) = clevel(&fixed, &absolute).unwrap() {
            let first_eligible = epsilon_sequence(&fixed)
                .unwrap()
                .into_iter()
                .find(|r| r.level >= relative && !r.is_rupture)
                .unwrap()
                .level;
            assert!(stop <= first_eligible);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[derive(Debug, serde::Deserialize)]
struct PublishedRun {
    table: u8,
    clevel: u32,
    baseline_clevel: u32,
    accuracy: Option<f64>,
    rc: String,
    rp: Option<String>,
}

/// Printed accuracies carry two decimals, so a printed RP is consistent when
/// some accuracy within half a unit of the last place reproduces it.
#[test]
fn published_cells_agree_up_to_accuracy_rounding() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/published_runs.csv");
    let rows: Vec<PublishedRun> = csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(rows.len(), 180);
    let mut rp_cells = 0;
    for r in &rows {
        let cost = rc(r.clevel, r.baseline_clevel);
        assert_eq!(format2(cost), r.rc, "table {} clevel {}", r.table, r.clevel);
        if let (Some(a), Some(rp)) = (r.accuracy, &r.rp) {
            rp_cells += 1;
            let printed: f64 = rp.parse().unwrap();
            let lo = round2(performance(a - 0.005, cost));
            let hi = round2(performance(a + 0.005, cost));
            assert!(
                lo - 1e-9 <= printed && printed <= hi + 1e-9,
                "table {} A {a} RC {cost}: RP {printed} outside [{lo}, {hi}]",
                r.table
            );
        }
    }
    assert!(rp_cells > 72);
}
