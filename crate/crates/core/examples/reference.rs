//! Runs the filter and two smoother windows on one simulated reference
//! scenario and prints mean OSPA, cardinality error and step time.

use glmb_core::metrics::{ospa, position};
use glmb_core::{OspaParams, Refinement, Scenario, Smoother, SmootherConfig};

fn main() -> glmb_core::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let scenario = Scenario { seed, ..Scenario::default() };
    let data = scenario.generate()?;
    let params = OspaParams::default();
    for refinement in [Refinement::None, Refinement::Window(5), Refinement::Window(20)] {
        let config = SmootherConfig { refinement, seed, ..SmootherConfig::default() };
        let mut tracker = Smoother::new(scenario.models.clone(), config)?;
        let mut seconds = 0.0;
        let mut card_err = 0.0;
        let mut online = 0.0;
        for k in 1..=data.duration() {
            seconds += tracker.step(data.measurements[k].clone())?.seconds;
            let est = tracker.filtered()?;
            card_err += (est.len() as f64 - data.truth[k].len() as f64).abs();
            let x: Vec<_> = data.truth[k].items().iter().map(|(s, _)| position(s)).collect();
            let y: Vec<_> = est.items().iter().map(|(s, _)| position(s)).collect();
            online += ospa(&x, &y, &params).total;
        }
        let est = tracker.estimate()?;
        let mut smoothed = 0.0;
        for k in 1..=data.duration() {
            let x: Vec<_> = data.truth[k].items().iter().map(|(s, _)| position(s)).collect();
            let y: Vec<_> = est.tracks.iter().filter_map(|t| t.at(k)).map(position).collect();
            smoothed += ospa(&x, &y, &params).total;
        }
        let n = data.duration() as f64;
        println!(
            "{refinement:?}: online ospa {:.2}, final ospa {:.2}, |card err| {:.2}, {:.3} s total, {} tracks",
            online / n, smoothed / n, card_err / n, seconds, est.tracks.len()
        );
    }
    Ok(())
}
