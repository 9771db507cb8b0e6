use mpdet::elim::{eliminate, ElimOptions, Eliminator, MinorSeries};
use mpdet::genmat::{synth_matrix, Family};
use mpdet::parexec::{par_eliminate, par_eliminate_into, ParConfig, ParError, WorkerTopology};
use mpdet::{MatrixBuffer, PrecComplex, PrecReal, Precision};
use proptest::prelude::*;

fn p(bits: u32) -> Precision {
    Precision::new(bits).unwrap()
}

#[test]
fn bit_identical_for_any_worker_count() {
    let a = synth_matrix(Family::RandomUniform, 37, 5, p(256));
    let serial = eliminate(a.clone(), &ElimOptions::default()).unwrap();
    for t in [1, 2, 3, 4, 8] {
        let par = par_eliminate(&a, &ParConfig::new(t), &ElimOptions::default()).unwrap();
        assert_eq!(par.trace.det_series, serial.trace.det_series, "T={t}");
        assert_eq!(par.trace.pivots, serial.trace.pivots, "T={t}");
        assert_eq!(par.minors.as_ref(), serial.minors.as_ref(), "T={t}");
        assert_eq!(par.stats.broadcasts, 37);
    }
}

#[test]
fn complex_and_limited_runs_match() {
    let prec = p(192);
    let re = synth_matrix(Family::RandomUniform, 12, 1, prec);
    let im = synth_matrix(Family::RandomUniform, 12, 2, prec);
    let a = MatrixBuffer::from_fn(12, |i, j| PrecComplex::new(re.get(i, j).clone(), im.get(i, j).clone()));
    for opts in [
        ElimOptions::default(),
        ElimOptions { limit_n: Some(9), ..Default::default() },
        ElimOptions { series: false, ..Default::default() },
        ElimOptions::determinant_only(),
    ] {
        let serial = eliminate(a.clone(), &opts).unwrap();
        let par = par_eliminate(&a, &ParConfig::new(3), &opts).unwrap();
        assert_eq!(par.trace.det_series, serial.trace.det_series);
        assert_eq!(par.minors, serial.minors);
    }
}

#[test]
fn transfer_accounting() {
    let n = 48;
    let a = synth_matrix(Family::RandomUniform, n, 3, p(128));
    let out = par_eliminate(&a, &ParConfig::new(4), &ElimOptions::default()).unwrap();
    let stats = &out.stats;
    assert_eq!(stats.broadcasts, n);
    assert_eq!(stats.per_step_bytes.iter().sum::<usize>(), stats.bytes_total);
    // Full row plus the running determinant at every step.
    assert!(stats.per_step_scalars.iter().all(|&c| c == n + 1));
    let total = stats.scalars_total();
    assert!(total >= n * n / 2 && total <= 2 * n * n);
    assert_eq!(stats.fanout_rounds, 2);
    assert_eq!(stats.hops_total, 2 * n);
    assert!(stats.max_imbalance <= 1);

    let det_only = par_eliminate(&a, &ParConfig::new(4), &ElimOptions::determinant_only()).unwrap();
    assert_eq!(det_only.stats.per_step_scalars[0], n + 1);
    assert_eq!(det_only.stats.per_step_scalars[n - 1], 2);
}

#[test]
fn zero_pivot_reaches_every_worker() {
    let prec = p(128);
    let rows = [[1, 2, 3, 4], [2, 4, 5, 1], [1, 1, 1, 1], [0, 3, 1, 2]];
    let a = MatrixBuffer::from_fn(4, |i, j| PrecReal::with_val(prec, rows[i][j]));
    let mut serial = Eliminator::new(a.clone(), ElimOptions::default()).unwrap();
    let mut serial_rows = serial.new_series();
    assert!(serial.run(&mut serial_rows).is_err());
    for t in [1, 2, 4] {
        let mut series = MinorSeries::new(4, Some(prec), None);
        let out = par_eliminate_into(&a, &ParConfig::new(t), &ElimOptions::default(), &mut series);
        assert!(matches!(out.error, Some(ParError::ZeroPivot { step: 2 })));
        assert_eq!(out.trace.det_series, serial.trace().det_series);
        assert_eq!(series.rows, serial_rows.rows);
    }
}

#[test]
fn worker_failure_aborts() {
    let a = synth_matrix(Family::RandomUniform, 10, 3, p(128));
    let cfg = ParConfig { fail_at: Some((2, 4)), ..ParConfig::new(3) };
    let err = par_eliminate(&a, &cfg, &ElimOptions::default()).unwrap_err();
    assert!(matches!(err, ParError::WorkerFailure { worker: 2, .. }), "{err}");
}

#[test]
fn process_transport_matches_threads() {
    let a = synth_matrix(Family::RandomUniform, 16, 8, p(256));
    let exe = std::path::PathBuf::from(env!("CARGO_BIN_EXE_mpdet"));
    let cfg = ParConfig { transport: mpdet::parexec::Transport::Process { exe: exe.clone() }, ..ParConfig::new(3) };
    let via_proc = par_eliminate(&a, &cfg, &ElimOptions::default()).unwrap();
    let serial = eliminate(a.clone(), &ElimOptions::default()).unwrap();
    assert_eq!(via_proc.trace.det_series, serial.trace.det_series);
    assert_eq!(via_proc.minors, serial.minors);
    assert_eq!(via_proc.stats.broadcasts, 16);

    let cfg = ParConfig { fail_at: Some((1, 5)), ..cfg };
    assert!(matches!(par_eliminate(&a, &cfg, &ElimOptions::default()), Err(ParError::WorkerFailure { worker: 1, .. })));
}

#[test]
fn shared_memory_blocks_match() {
    let a = synth_matrix(Family::RandomIllcond, 29, 4, p(256));
    let serial = eliminate(a.clone(), &ElimOptions::default()).unwrap();
    for t in [2, 3, 5] {
        let mut el = Eliminator::new(a.clone(), ElimOptions::default()).unwrap().with_threads(t);
        let mut series = el.new_series();
        el.run(&mut series).unwrap();
        assert_eq!(el.trace().det_series, serial.trace.det_series);
        assert_eq!(Some(&series), serial.minors.as_ref());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn interleaved_ownership_is_balanced(t in 1usize..9, n in 1usize..60) {
        let topo = WorkerTopology::new(t).unwrap();
        for step in 1..=n {
            let c = topo.updates_at(step, n);
            prop_assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1);
        }
        let mut seen = vec![0; n];
        for w in 1..=t {
            for r in topo.rows_of(w, n) {
                seen[r - 1] += 1;
                prop_assert_eq!(topo.owner(r), w);
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn random_sizes_match_serial(n in 1usize..14, t in 1usize..6, seed in any::<u64>()) {
        let a = synth_matrix(Family::RandomUniform, n, seed, p(128));
        let serial = eliminate(a.clone(), &ElimOptions::default()).unwrap();
        let par = par_eliminate(&a, &ParConfig::new(t), &ElimOptions::default()).unwrap();
        prop_assert_eq!(par.trace.det_series, serial.trace.det_series);
        prop_assert_eq!(par.minors, serial.minors);
    }
}

