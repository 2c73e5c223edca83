mod common;

use asknav_core::env::Action;
use asknav_core::metrics::{
    aggregate_report, analyze, ask_stats, delta_lambda_stats, render_analysis, spl, success_rate, summary_json,
    MetricsError, Split, TaxonomyParams, ABSENT_MARKER, EMPTY_MARKER,
};

use common::fixtures::{episode, taxonomy_logs};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

#[test]
fn both_seen_report_is_exact() {
    let logs = taxonomy_logs();
    let r = aggregate_report(&logs, Split::BothSeen, &TaxonomyParams::default()).unwrap().unwrap();
    assert_eq!(r.episodes, 3);
    assert!(close(r.sr, 200.0 / 3.0));
    assert!(close(r.spl, 100.0 * (4.0 / 7.0 + 0.0 + 1.0) / 3.0));
    let t = r.taxonomy;
    assert_eq!(
        (t.total_actions, t.total_asks, t.consecutive_asks, t.vapid_asks, t.insignificant_asks),
        (12, 4, 1, 1, 3)
    );
    assert!(close(r.ask_rate.unwrap(), 100.0 * 4.0 / 12.0));
    assert!(close(r.consecutive_pct.unwrap(), 25.0));
    assert!(close(r.vapid_pct.unwrap(), 25.0));
    assert!(close(r.insignificant_pct.unwrap(), 75.0));
    assert_eq!((r.delta_lambda.nav_steps, r.delta_lambda.ask_steps), (5, 4));
    assert!(close(r.delta_lambda.nav_mean.unwrap(), 18.5 / 5.0));
    assert!(close(r.delta_lambda.ask_mean.unwrap(), 2.5 / 4.0));
}

#[test]
fn boundaries_are_strict() {
    let params = TaxonomyParams::default();
    let at_gamma = episode(&[(Action::Ask, 8.0, 2.0)], false, Some(1), 10.0, None);
    assert_eq!(ask_stats(&[at_gamma], &params).insignificant_asks, 0);
    let below = episode(&[(Action::Ask, 8.0, 2.0 - 1e-9)], false, Some(1), 10.0, None);
    assert_eq!(ask_stats(&[below], &params).insignificant_asks, 1);
    let at_fraction = episode(&[(Action::RotateLeft, 1.0, 9.0), (Action::Ask, 1.0, 0.0)], false, Some(1), 10.0, None);
    assert_eq!(ask_stats(&[at_fraction], &params).vapid_asks, 0);
    let under = episode(&[(Action::RotateLeft, 0.999, 9.001), (Action::Ask, 0.999, 0.0)], false, Some(1), 10.0, None);
    assert_eq!(ask_stats(&[under], &params).vapid_asks, 1);
}

#[test]
fn splits_and_errors() {
    let logs = taxonomy_logs();
    let params = TaxonomyParams::default();
    let unseen = aggregate_report(&logs, Split::UnseenObjects, &params).unwrap().unwrap();
    assert_eq!(unseen.episodes, 1);
    assert!(close(unseen.spl, 100.0));
    assert_eq!(aggregate_report(&logs, Split::BothUnseen, &params).unwrap(), None);

    let untagged = vec![episode(&[(Action::Stop, 0.0, 0.0)], true, Some(0), 1.0, None)];
    assert_eq!(aggregate_report(&untagged, Split::BothSeen, &params), Err(MetricsError::Untagged { index: 0 }));
    let unreachable = vec![episode(&[(Action::Stop, 0.0, 0.0)], false, None, 1.0, Some((true, true)))];
    assert_eq!(spl(&unreachable), Err(MetricsError::Unreachable { index: 0 }));
    assert_eq!(success_rate(&[]), Err(MetricsError::Empty));
    assert_eq!(delta_lambda_stats(&[]).ask_mean, None);
}

#[test]
fn rendered_tables_mark_empty_and_absent_cells() {
    let analysis = analyze(&taxonomy_logs(), &TaxonomyParams::default()).unwrap();
    let text = render_analysis(&analysis);
    assert!(text.contains(EMPTY_MARKER));
    assert_eq!(render_analysis(&analysis), text);
    let no_asks = analyze(&[taxonomy_logs()[1].clone()], &TaxonomyParams::default()).unwrap();
    assert!(render_analysis(&no_asks).contains(ABSENT_MARKER));
    let json: serde_json::Value = serde_json::from_str(&summary_json(&analysis)).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 1);
}
