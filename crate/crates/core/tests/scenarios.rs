use hotline_core::eal::{
    capture_rate, lfu_oracle, oracle_hot, Decay, EalConfig, EalState, OracleSelection,
};
use hotline_core::pipeline::{simulate_hotline, simulate_hybrid_baseline, CostModel};
use hotline_core::sched::{schedule, RuntimeConfig};
use hotline_core::trace::{batch, gen_zipf_trace, TableSpec, TrainingInput};

fn phase(tables: &[TableSpec], seed: u64) -> Vec<TrainingInput> {
    gen_zipf_trace(tables, 40_000, &[1.1], seed)
        .unwrap()
        .collect()
}

fn observe(eal: &mut EalState, inputs: &[TrainingInput]) {
    for a in inputs.iter().flat_map(|i| &i.accesses) {
        eal.observe(*a).unwrap();
    }
}

/// Popularity moves to new rows halfway; relearning recovers the capture.
#[test]
fn recalibration_recovers_after_drift() {
    let tables = [TableSpec::new(0, 200_000, 16, 1)];
    let (first, second) = (phase(&tables, 1), phase(&tables, 2));
    let blocks = 4096;
    let top = |inputs: &[TrainingInput]| {
        let counts = lfu_oracle(inputs).unwrap();
        oracle_hot(&counts, OracleSelection::TopK(blocks), &tables).unwrap()
    };
    let (oracle_a, oracle_b) = (top(&first), top(&second));

    for decay in [Decay::ResetRrpv, Decay::Clear] {
        let mut eal = EalState::new(EalConfig {
            num_blocks: blocks,
            ..Default::default()
        })
        .unwrap();
        observe(&mut eal, &first);
        let hot_a = eal.freeze(&tables);
        let before = capture_rate(&hot_a, &oracle_a).unwrap();
        let stale = capture_rate(&hot_a, &oracle_b).unwrap();

        eal.unfreeze_for_recalibration(decay);
        observe(&mut eal, &second);
        let after = capture_rate(&eal.freeze(&tables), &oracle_b).unwrap();

        assert!(
            stale < before - 0.2,
            "{decay:?}: stale {stale} before {before}"
        );
        assert!(
            (after - before).abs() <= 0.05,
            "{decay:?}: before {before} after {after}"
        );
    }
}

#[test]
fn hotline_transfer_share_below_hybrid() {
    let tables = vec![
        TableSpec::new(0, 100_000, 32, 2),
        TableSpec::new(1, 5_000, 32, 1),
        TableSpec::new(2, 200, 32, 1),
    ];
    let inputs = gen_zipf_trace(&tables, 32_768, &[1.2, 1.1, 1.05], 3).unwrap();
    let batches: Vec<_> = batch(inputs, 1024).unwrap().collect();
    let mut eal = EalState::new(EalConfig {
        num_blocks: 16_384,
        ..Default::default()
    })
    .unwrap();
    let run = schedule(&batches, &tables, &mut eal, 1024, &RuntimeConfig::default()).unwrap();
    let cost = CostModel::default();
    let hotline = simulate_hotline(&run, &cost).unwrap().throughput;
    let hybrid = simulate_hybrid_baseline(&batches, &tables, &cost)
        .unwrap()
        .throughput;
    let share = |b: &hotline_core::pipeline::Breakdown| b.transfer / b.total();
    assert!(share(&hotline.breakdown) < share(&hybrid.breakdown));
    assert!(hotline.total_time <= hybrid.total_time);
}
