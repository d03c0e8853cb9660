mod common;

use tailors_stats::report::{FAMILIES, ReportOptions, WilcoxonPairing};
use tailors_stats::survey::{participants, Condition, Survey};
use tailors_stats::{aggregate_participant_means, build_reports, load_survey_csv, parse_survey_csv};

#[test]
fn full_design_fixture_loads() {
    let csv = common::design_csv(27, 1, false);
    let records = parse_survey_csv(csv.as_bytes()).unwrap();
    assert_eq!(records.len(), 27 * 20 * 3 * 25);
    let per_item = records
        .iter()
        .filter(|r| r.survey == Survey::Timbre && r.feature == "warm")
        .count();
    assert_eq!(per_item, 1620);
}

#[test]
fn participant_means_match_summation_oracle() {
    let csv = common::design_csv(9, 4, false);
    let records = parse_survey_csv(csv.as_bytes()).unwrap();
    // independent route: re-read the raw text and sum per participant
    let mut sums = std::collections::BTreeMap::<String, (u32, u32)>::new();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[2] == "B" && f[3] == "entertainment" && f[4] == "rhythm" {
            let e = sums.entry(f[0].to_string()).or_default();
            e.0 += f[5].parse::<u32>().unwrap();
            e.1 += 1;
        }
    }
    let means =
        aggregate_participant_means(&records, Survey::Entertainment, "rhythm", Condition::B).unwrap();
    assert_eq!(means.len(), 9);
    for (m, (pid, (sum, count))) in means.iter().zip(sums) {
        assert_eq!(m.participant_id, pid);
        assert!((m.mean - sum as f64 / count as f64).abs() < 1e-12);
    }
}

#[test]
fn regressions_report_expected_degrees_of_freedom() {
    let records = parse_survey_csv(common::design_csv(27, 2, false).as_bytes()).unwrap();
    assert_eq!(participants(&records).len(), 27);
    let bundle = build_reports(&records, &ReportOptions::default()).unwrap();
    for table in &bundle.regression_timbre_imagery {
        assert_eq!(table.rows.len(), 12 * 5);
        assert!(table.rows.iter().all(|r| (r.df_model, r.df_resid) == (12, 14)));
    }
    for table in &bundle.regression_imagery_entertainment {
        assert_eq!(table.rows.len(), 5 * 8);
        assert!(table.rows.iter().all(|r| (r.df_model, r.df_resid) == (5, 21)));
    }
    let text = bundle.family_text("regression_timbre_imagery").unwrap();
    assert!(text.contains("F(12, 14)="));
}

#[test]
fn every_table_kind_is_produced_with_stars() {
    let records = parse_survey_csv(common::design_csv(27, 5, false).as_bytes()).unwrap();
    let bundle = build_reports(&records, &ReportOptions::default()).unwrap();
    assert_eq!(bundle.kruskal_wallis.len(), 25);
    assert_eq!(bundle.regression_timbre_imagery.len(), 3);
    assert_eq!(bundle.regression_imagery_entertainment.len(), 3);
    assert_eq!(bundle.fisher_timbre_imagery.len(), 2);
    assert_eq!(bundle.fisher_imagery_entertainment.len(), 2);
    assert_eq!(bundle.wilcoxon.len(), 9);
    let star_ok = |p: f64, s: &str| s == tailors_stats::significance_stars(p);
    assert!(bundle.kruskal_wallis.iter().all(|r| star_ok(r.p_value, r.stars)));
    for t in bundle.regression_timbre_imagery.iter().chain(&bundle.regression_imagery_entertainment) {
        assert!(t.rows.iter().all(|r| star_ok(r.p_value, r.stars) && star_ok(r.f_p_value, r.f_stars)));
    }
    for t in bundle.fisher_timbre_imagery.iter().chain(&bundle.fisher_imagery_entertainment) {
        assert!(t.rows.iter().all(|r| r.p_value.map_or(r.stars.is_empty(), |p| star_ok(p, r.stars))));
    }
    for t in &bundle.wilcoxon {
        assert!(t.rows.iter().all(|r| star_ok(r.p_value, r.stars)));
    }
    // first Fisher table is A vs C, timbre -> imagery, ordered by DV then IV
    let t = &bundle.fisher_timbre_imagery[0];
    assert_eq!((t.first, t.second), (Condition::A, Condition::C));
    assert_eq!((t.rows[0].iv.as_str(), t.rows[0].dv), ("hard", "flow"));
    assert_eq!((t.rows[11].iv.as_str(), t.rows[12].dv), ("blunt", "force"));
}

#[test]
fn constant_shift_flags_every_a_vs_c_feature() {
    let records = parse_survey_csv(common::design_csv(27, 6, true).as_bytes()).unwrap();
    for pairing in [WilcoxonPairing::ParticipantMusic, WilcoxonPairing::ParticipantMean] {
        let options = ReportOptions {
            wilcoxon_pairing: pairing,
            ..ReportOptions::default()
        };
        let bundle = build_reports(&records, &options).unwrap();
        let a_vs_c: Vec<_> = bundle
            .wilcoxon
            .iter()
            .filter(|t| (t.first, t.second) == (Condition::A, Condition::C))
            .collect();
        assert_eq!(a_vs_c.len(), 3);
        for table in a_vs_c {
            assert_eq!(table.not_significant().count(), 0, "{:?}", table.survey);
            for row in &table.rows {
                assert!(row.mean_second > row.mean_first);
            }
        }
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("survey.csv");
    std::fs::write(&csv_path, common::design_csv(27, 8, false)).unwrap();
    let records = load_survey_csv(&csv_path).unwrap();
    let render = |sub: &str| {
        let out = dir.path().join(sub);
        build_reports(&records, &ReportOptions::default())
            .unwrap()
            .write_to_dir(&out)
            .unwrap();
        FAMILIES
            .iter()
            .flat_map(|f| {
                ["json", "txt"].map(|ext| std::fs::read(out.join(format!("{f}.{ext}"))).unwrap())
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(render("one"), render("two"));
}

#[test]
fn drop_list_removes_ivs() {
    let records = parse_survey_csv(common::design_csv(27, 9, false).as_bytes()).unwrap();
    let options = ReportOptions {
        drop_ivs: vec!["soft".into(), "cold".into()],
        ..ReportOptions::default()
    };
    let bundle = build_reports(&records, &options).unwrap();
    let t = &bundle.regression_timbre_imagery[0];
    assert!(t.rows.iter().all(|r| r.iv != "soft" && r.iv != "cold"));
    assert!(t.rows.iter().all(|r| (r.df_model, r.df_resid) == (10, 16)));
}

#[test]
fn missing_cell_propagates_with_context() {
    let mut csv = common::design_csv(4, 10, false);
    // P04 never answers the imagery survey under condition B
    csv = csv
        .lines()
        .filter(|l| !l.starts_with("P04") || !l.contains(",B,imagery,"))
        .collect::<Vec<_>>()
        .join("\n");
    let records = parse_survey_csv(csv.as_bytes()).unwrap();
    let err = build_reports(&records, &ReportOptions::default()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("condition B") || msg.contains("imagery"), "{msg}");
}

/// Scores spread around a per-participant level; seed 3 yields a
/// standardized beta above 1 in the B-vs-C timbre -> imagery comparison.
fn wide_design(seed: u64) -> String {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from(common::HEADER);
    for p in 1..=27 {
        let level: i32 = rng.random_range(-1..=1);
        for music in 1..=20 {
            for survey in Survey::ALL {
                for feature in survey.features() {
                    for condition in Condition::ALL {
                        let score = (4 + level + rng.random_range(-3..=3)).clamp(1, 7);
                        out.push_str(&format!("P{p:02},{music},{condition},{survey},{feature},{score}\n"));
                    }
                }
            }
        }
    }
    out
}

#[test]
fn fisher_rows_with_betas_beyond_one_are_marked_not_computable() {
    let records = parse_survey_csv(wide_design(3).as_bytes()).unwrap();
    let bundle = build_reports(&records, &ReportOptions::default()).unwrap();
    let rows: Vec<_> = bundle
        .fisher_timbre_imagery
        .iter()
        .flat_map(|t| t.rows.iter())
        .collect();
    let skipped: Vec<_> = rows.iter().filter(|r| r.z_stat.is_none()).collect();
    assert!(!skipped.is_empty());
    for r in &skipped {
        assert!(r.r1.abs() >= 1.0 || r.r2.abs() >= 1.0);
        assert!(r.p_value.is_none() && r.stars.is_empty());
    }
    assert!(rows.iter().any(|r| r.z_stat.is_some()));
    assert!(bundle.family_text("fisher_timbre_imagery").unwrap().contains("n/a"));
    assert!(bundle.family_json("fisher_timbre_imagery").unwrap().contains("\"z_stat\": null"));
}
