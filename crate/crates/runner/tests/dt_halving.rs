//! Halving every integrator step leaves each criterion's verdict unchanged.

use lvwf_runner::criteria::{run_timed, Mode, CRITERIA};

#[test]
fn halving_dt_keeps_verdicts() {
    let mut changed = Vec::new();
    for c in &CRITERIA {
        let base = run_timed(c, Mode::FULL).unwrap();
        let fine = run_timed(c, Mode::FULL.with_dt_divisor(2)).unwrap();
        println!("dt:   {}", base.line());
        println!("dt/2: {}", fine.line());
        if base.outcome.passed != fine.outcome.passed {
            changed.push(c.id);
        }
    }
    assert!(changed.is_empty(), "verdicts changed under dt/2 for criteria {changed:?}");
}
