//! Drives a human-oracle session in-process: an "annotator" polls the
//! pending batch and answers from ground truth, as the label UI would over
//! HTTP. Optionally writes the first queried observation as a PNG.
//!
//! ```text
//! cargo run --release -p spadal-service --example annotate_session -- [first_query.png]
//! ```

use std::collections::BTreeMap;
use std::thread::sleep;
use std::time::Duration;

use base64::Engine;
use spadal::al::{ALConfig, Oracle, OracleMode, SimulatedOracle};
use spadal::dataset::{build_dataset, default_reference_condition, default_variant_conditions, generate_dataset, GenOptions};
use spadal_service::{Service, SessionState};

fn main() -> spadal::Result<()> {
    let png_out = std::env::args().nth(1);
    let dir = tempfile::tempdir()?;
    let manifest = generate_dataset(dir.path(), &GenOptions { per_class: 20, ..GenOptions::default() })?;
    let data = build_dataset(&manifest, &default_variant_conditions(), &default_reference_condition(), 0)?;
    let truth = data.pools.clone();

    let service = Service::new(data, None)?;
    let cfg = ALConfig { oracle: OracleMode::Human, rounds: 3, batch_size: 6, candidates: 18, ..ALConfig::default() };
    let session = service.create_session(cfg)?;
    println!("session {}", session.id());

    let mut saved = false;
    loop {
        match session.state() {
            SessionState::Finished | SessionState::Failed => break,
            SessionState::AwaitingLabels => {}
            _ => {
                sleep(Duration::from_millis(50));
                continue;
            }
        }
        let Ok(batch) = session.queries() else { continue };
        if let (false, Some(path), Some(first)) = (saved, &png_out, batch.first()) {
            let png = base64::engine::general_purpose::STANDARD.decode(&first.observed).expect("valid base64");
            std::fs::write(path, png)?;
            saved = true;
        }
        let ids: Vec<_> = batch.iter().map(|q| q.group_id.clone()).collect();
        let answers = SimulatedOracle.label(&truth, &ids)?;
        let labels: BTreeMap<_, _> = ids.into_iter().zip(answers).collect();
        let ack = session.submit_labels(&labels).expect("labels accepted");
        println!("round {}: answered {} queries (advanced: {})", session.snapshot().round, ack.accepted, ack.advanced);
    }

    let snap = session.snapshot();
    println!("state {:?}", snap.state);
    for h in &snap.history {
        println!("  round {} labeled {:>3} accuracy {:.1}%", h.round, h.labeled_count, h.accuracy);
    }
    print!("{}", String::from_utf8_lossy(&session.metrics_csv()));
    service.shutdown();
    Ok(())
}
