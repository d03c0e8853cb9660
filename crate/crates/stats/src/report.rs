//! Report tables: Kruskal-Wallis, per-condition regressions, Fisher
//! coefficient comparisons and Wilcoxon significant/not-significant splits.
//!
//! Each table family is written as `<family>.json` plus an aligned-text
//! `<family>.txt`. Ordering is fixed: condition A, B, C; surveys in
//! questionnaire order; features in questionnaire order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Result, StatsError};
use crate::fisher::{fisher_compare, significance_stars};
use crate::nonparametric::{kruskal_wallis, wilcoxon_signed_rank};
use crate::regression::ols_fit;
use crate::survey::{aggregate_participant_means, participants, Condition, Survey, SurveyRecord};

/// Unit of observation paired by the Wilcoxon tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonPairing {
    /// One pair per (participant, music piece).
    #[default]
    ParticipantMusic,
    /// One pair per participant, using their mean over music pieces.
    ParticipantMean,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportOptions {
    /// z-score IVs and DV before fitting so coefficients are standardized
    /// betas, the scale the Fisher comparison assumes.
    pub standardize: bool,
    /// Independent variables removed from every regression (multicollinearity
    /// handling is left to the analyst).
    pub drop_ivs: Vec<String>,
    pub wilcoxon_pairing: WilcoxonPairing,
    /// Threshold for the significant/not-significant split.
    pub alpha: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            standardize: true,
            drop_ivs: Vec::new(),
            wilcoxon_pairing: WilcoxonPairing::default(),
            alpha: 0.05,
        }
    }
}

/// Condition pairs compared by the Fisher tables.
pub const FISHER_PAIRS: [(Condition, Condition); 2] =
    [(Condition::A, Condition::C), (Condition::B, Condition::C)];

/// Condition pairs compared by the Wilcoxon tables.
pub const WILCOXON_PAIRS: [(Condition, Condition); 3] = [
    (Condition::B, Condition::C),
    (Condition::A, Condition::C),
    (Condition::A, Condition::B),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KruskalRow {
    pub survey: Survey,
    pub feature: &'static str,
    pub h: f64,
    pub p_value: f64,
    pub stars: &'static str,
    pub n: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionRow {
    pub condition: Condition,
    pub iv: String,
    pub dv: &'static str,
    pub coefficient: f64,
    pub std_err: f64,
    pub t_value: f64,
    pub p_value: f64,
    pub stars: &'static str,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_statistic: f64,
    pub f_p_value: f64,
    pub f_stars: &'static str,
    pub df_model: usize,
    pub df_resid: usize,
    pub condition_number: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionTable {
    pub iv_survey: Survey,
    pub dv_survey: Survey,
    pub rows: Vec<RegressionRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherRow {
    pub iv: String,
    pub dv: &'static str,
    pub r1: f64,
    pub r2: f64,
    pub n1: usize,
    pub n2: usize,
    /// `None` when a coefficient lies outside (-1, 1), where the z transform
    /// is undefined (standardized betas can exceed 1 under collinearity).
    pub z_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherTable {
    pub iv_survey: Survey,
    pub dv_survey: Survey,
    pub first: Condition,
    pub second: Condition,
    pub rows: Vec<FisherRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilcoxonRow {
    pub feature: &'static str,
    pub p_value: f64,
    pub stars: &'static str,
    pub statistic: f64,
    pub n: usize,
    pub mean_first: f64,
    pub mean_second: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilcoxonTable {
    pub survey: Survey,
    pub first: Condition,
    pub second: Condition,
    pub pairing: WilcoxonPairing,
    pub rows: Vec<WilcoxonRow>,
}

impl WilcoxonTable {
    pub fn significant(&self) -> impl Iterator<Item = &WilcoxonRow> {
        self.rows.iter().filter(|r| r.significant)
    }

    pub fn not_significant(&self) -> impl Iterator<Item = &WilcoxonRow> {
        self.rows.iter().filter(|r| !r.significant)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub participants: usize,
    pub options: ReportOptions,
    pub kruskal_wallis: Vec<KruskalRow>,
    pub regression_timbre_imagery: Vec<RegressionTable>,
    pub regression_imagery_entertainment: Vec<RegressionTable>,
    pub fisher_timbre_imagery: Vec<FisherTable>,
    pub fisher_imagery_entertainment: Vec<FisherTable>,
    pub wilcoxon: Vec<WilcoxonTable>,
}

/// Table family names, also used as output file stems.
pub const FAMILIES: [&str; 6] = [
    "kruskal_wallis",
    "regression_timbre_imagery",
    "regression_imagery_entertainment",
    "fisher_timbre_imagery",
    "fisher_imagery_entertainment",
    "wilcoxon",
];

type CellKey = (Survey, &'static str, Condition);

struct Index<'a> {
    participants: Vec<String>,
    cells: HashMap<CellKey, Vec<&'a SurveyRecord>>,
    scores: HashMap<(&'a str, u8, Condition, Survey, &'static str), f64>,
}

impl<'a> Index<'a> {
    fn new(records: &'a [SurveyRecord]) -> Self {
        let scores = records
            .iter()
            .map(|r| {
                (
                    (r.participant_id.as_str(), r.music_id, r.condition, r.survey, r.feature),
                    f64::from(r.score),
                )
            })
            .collect();
        let mut cells: HashMap<CellKey, Vec<&SurveyRecord>> = HashMap::new();
        for r in records {
            cells.entry((r.survey, r.feature, r.condition)).or_default().push(r);
        }
        Self {
            participants: participants(records),
            cells,
            scores,
        }
    }

    fn cell(&self, survey: Survey, feature: &'static str, condition: Condition) -> &[&'a SurveyRecord] {
        self.cells
            .get(&(survey, feature, condition))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    fn cell_scores(&self, survey: Survey, feature: &'static str, condition: Condition) -> Vec<f64> {
        self.cell(survey, feature, condition)
            .iter()
            .map(|r| f64::from(r.score))
            .collect()
    }

    /// Participant means of one cell, ordered like `self.participants`.
    fn means(&self, survey: Survey, feature: &'static str, condition: Condition) -> Result<Vec<f64>> {
        let cell: Vec<SurveyRecord> = self
            .cell(survey, feature, condition)
            .iter()
            .map(|r| (*r).clone())
            .collect();
        let means = aggregate_participant_means(&cell, survey, feature, condition)?;
        // aggregate only sees participants present in the cell
        if let Some(missing) = self
            .participants
            .iter()
            .find(|p| means.binary_search_by(|m| m.participant_id.as_str().cmp(p)).is_err())
        {
            return Err(StatsError::MissingCell {
                participant: missing.clone(),
                cell: format!("({survey}, {feature}, {condition})"),
            });
        }
        Ok(means.into_iter().map(|m| m.mean).collect())
    }

    /// Scores answered under both conditions for the same participant and music.
    fn paired_scores(
        &self,
        survey: Survey,
        feature: &'static str,
        first: Condition,
        second: Condition,
    ) -> Vec<(f64, f64)> {
        let mut pairs: Vec<((&str, u8), (f64, f64))> = self
            .cell(survey, feature, first)
            .iter()
            .filter_map(|r| {
                let key = (r.participant_id.as_str(), r.music_id, second, survey, feature);
                self.scores
                    .get(&key)
                    .map(|y| ((key.0, key.1), (f64::from(r.score), *y)))
            })
            .collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        pairs.into_iter().map(|(_, p)| p).collect()
    }
}

/// Builds every table family from validated survey records.
pub fn build_reports(records: &[SurveyRecord], options: &ReportOptions) -> Result<ReportBundle> {
    let index = Index::new(records);
    if index.participants.is_empty() {
        return Err(StatsError::DegenerateInput("no survey records".into()));
    }

    let kruskal_wallis = kruskal_table(&index)?;
    let regression_timbre_imagery = regression_tables(&index, options, Survey::Timbre, Survey::Imagery)?;
    let regression_imagery_entertainment =
        regression_tables(&index, options, Survey::Imagery, Survey::Entertainment)?;
    let fisher_timbre_imagery = fisher_tables(&regression_timbre_imagery)?;
    let fisher_imagery_entertainment = fisher_tables(&regression_imagery_entertainment)?;
    let wilcoxon = wilcoxon_tables(&index, options)?;

    Ok(ReportBundle {
        participants: index.participants.len(),
        options: options.clone(),
        kruskal_wallis,
        regression_timbre_imagery,
        regression_imagery_entertainment,
        fisher_timbre_imagery,
        fisher_imagery_entertainment,
        wilcoxon,
    })
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn kruskal_table(index: &Index<'_>) -> Result<Vec<KruskalRow>> {
    let mut rows = Vec::new();
    for survey in Survey::ALL {
        for &feature in survey.features() {
            let groups: Vec<Vec<f64>> = Condition::ALL
                .iter()
                .map(|&c| index.cell_scores(survey, feature, c))
                .collect();
            let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
            let test = kruskal_wallis(&refs)
                .map_err(|e| e.in_table(format!("Kruskal-Wallis {survey}/{feature}")))?;
            rows.push(KruskalRow {
                survey,
                feature,
                h: test.statistic,
                p_value: test.p_value,
                stars: significance_stars(test.p_value),
                n: test.n,
                mean_a: mean(&groups[0]),
                mean_b: mean(&groups[1]),
                mean_c: mean(&groups[2]),
            });
        }
    }
    Ok(rows)
}

fn standardize(xs: &mut [f64]) {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0);
    let sd = var.sqrt();
    if sd > 0.0 {
        for x in xs.iter_mut() {
            *x = (*x - m) / sd;
        }
    }
}

fn regression_tables(
    index: &Index<'_>,
    options: &ReportOptions,
    iv_survey: Survey,
    dv_survey: Survey,
) -> Result<Vec<RegressionTable>> {
    let ivs: Vec<&'static str> = iv_survey
        .features()
        .iter()
        .copied()
        .filter(|f| !options.drop_ivs.iter().any(|d| d == f))
        .collect();
    let iv_names: Vec<String> = ivs.iter().map(|s| s.to_string()).collect();
    let n = index.participants.len();

    let mut tables = Vec::new();
    for condition in Condition::ALL {
        let context = |dv: &str| format!("regression {iv_survey}->{dv_survey}, condition {condition}, DV {dv}");

        let mut columns = Vec::with_capacity(n * ivs.len());
        for iv in &ivs {
            let mut col = index
                .means(iv_survey, iv, condition)
                .map_err(|e| e.in_table(context("-")))?;
            if options.standardize {
                standardize(&mut col);
            }
            columns.extend(col);
        }
        let design = DMatrix::from_column_slice(n, ivs.len(), &columns);

        let mut rows = Vec::new();
        for &dv in dv_survey.features() {
            let mut y = index
                .means(dv_survey, dv, condition)
                .map_err(|e| e.in_table(context(dv)))?;
            if options.standardize {
                standardize(&mut y);
            }
            let fit = ols_fit(&design, &y, &iv_names).map_err(|e| e.in_table(context(dv)))?;
            for row in &fit.rows {
                rows.push(RegressionRow {
                    condition,
                    iv: row.iv_name.clone(),
                    dv,
                    coefficient: row.coefficient,
                    std_err: row.std_err,
                    t_value: row.t_value,
                    p_value: row.p_value,
                    stars: significance_stars(row.p_value),
                    r_squared: fit.r_squared,
                    adj_r_squared: fit.adj_r_squared,
                    f_statistic: fit.f_statistic,
                    f_p_value: fit.f_p_value,
                    f_stars: significance_stars(fit.f_p_value),
                    df_model: fit.df_model,
                    df_resid: fit.df_resid,
                    condition_number: fit.condition_number,
                });
            }
        }
        tables.push(RegressionTable {
            iv_survey,
            dv_survey,
            rows,
        });
    }
    Ok(tables)
}

fn fisher_tables(regressions: &[RegressionTable]) -> Result<Vec<FisherTable>> {
    let by_condition = |c: Condition| {
        regressions
            .iter()
            .find(|t| t.rows.first().map(|r| r.condition) == Some(c))
    };
    let mut tables = Vec::new();
    for (first, second) in FISHER_PAIRS {
        let (Some(a), Some(b)) = (by_condition(first), by_condition(second)) else {
            continue;
        };
        let mut rows = Vec::new();
        // rows are already in (dv, iv) questionnaire order in both tables
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            debug_assert_eq!((ra.dv, &ra.iv), (rb.dv, &rb.iv));
            let n1 = ra.df_model + ra.df_resid + 1;
            let n2 = rb.df_model + rb.df_resid + 1;
            let (z_stat, p_value, stars) = match fisher_compare(ra.coefficient, n1, rb.coefficient, n2) {
                Ok(cmp) => (Some(cmp.z_stat), Some(cmp.p_value), cmp.stars),
                Err(StatsError::CoefficientOutOfRange { .. }) => (None, None, ""),
                Err(e) => {
                    return Err(e.in_table(format!(
                        "Fisher {}->{} {first} vs {second}, {} -> {}",
                        a.iv_survey, a.dv_survey, ra.iv, ra.dv
                    )))
                }
            };
            rows.push(FisherRow {
                iv: ra.iv.clone(),
                dv: ra.dv,
                r1: ra.coefficient,
                r2: rb.coefficient,
                n1,
                n2,
                z_stat,
                p_value,
                stars,
            });
        }
        tables.push(FisherTable {
            iv_survey: a.iv_survey,
            dv_survey: a.dv_survey,
            first,
            second,
            rows,
        });
    }
    Ok(tables)
}

fn wilcoxon_tables(index: &Index<'_>, options: &ReportOptions) -> Result<Vec<WilcoxonTable>> {
    let mut tables = Vec::new();
    for survey in Survey::ALL {
        for (first, second) in WILCOXON_PAIRS {
            let mut rows = Vec::new();
            for &feature in survey.features() {
                let context = || format!("Wilcoxon {survey}/{feature}, {first} vs {second}");
                let pairs = match options.wilcoxon_pairing {
                    WilcoxonPairing::ParticipantMusic => {
                        index.paired_scores(survey, feature, first, second)
                    }
                    WilcoxonPairing::ParticipantMean => {
                        let xs = index
                            .means(survey, feature, first)
                            .map_err(|e| e.in_table(context()))?;
                        let ys = index
                            .means(survey, feature, second)
                            .map_err(|e| e.in_table(context()))?;
                        xs.into_iter().zip(ys).collect()
                    }
                };
                let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                let result = wilcoxon_signed_rank(&pairs).map_err(|e| e.in_table(context()))?;
                let p = result.test.p_value;
                rows.push(WilcoxonRow {
                    feature,
                    p_value: p,
                    stars: significance_stars(p),
                    statistic: result.test.statistic,
                    n: result.test.n,
                    mean_first: mean(&xs),
                    mean_second: mean(&ys),
                    significant: p < options.alpha,
                });
            }
            tables.push(WilcoxonTable {
                survey,
                first,
                second,
                pairing: options.wilcoxon_pairing,
                rows,
            });
        }
    }
    Ok(tables)
}

// ---- rendering ----

fn fmt4(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        format!("{x}")
    }
}

fn fmt_p(p: f64) -> String {
    if p.is_finite() && p > 0.0 && p < 1e-4 {
        format!("{p:.2e}")
    } else {
        fmt4(p)
    }
}

/// Left-aligned columns separated by two spaces.
fn render_table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let _ = write!(s, "{cell:<w$}");
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&mut header.iter().copied());
    for row in rows {
        line(&mut row.iter().map(String::as_str));
    }
}

impl ReportBundle {
    pub fn family_json(&self, family: &str) -> Result<String> {
        let value = match family {
            "kruskal_wallis" => serde_json::to_string_pretty(&self.kruskal_wallis)?,
            "regression_timbre_imagery" => serde_json::to_string_pretty(&self.regression_timbre_imagery)?,
            "regression_imagery_entertainment" => {
                serde_json::to_string_pretty(&self.regression_imagery_entertainment)?
            }
            "fisher_timbre_imagery" => serde_json::to_string_pretty(&self.fisher_timbre_imagery)?,
            "fisher_imagery_entertainment" => {
                serde_json::to_string_pretty(&self.fisher_imagery_entertainment)?
            }
            "wilcoxon" => serde_json::to_string_pretty(&self.wilcoxon)?,
            other => {
                return Err(StatsError::DegenerateInput(format!("unknown table family `{other}`")))
            }
        };
        Ok(value + "\n")
    }

    pub fn family_text(&self, family: &str) -> Result<String> {
        let mut out = String::new();
        match family {
            "kruskal_wallis" => self.render_kruskal(&mut out),
            "regression_timbre_imagery" => render_regressions(&mut out, &self.regression_timbre_imagery),
            "regression_imagery_entertainment" => {
                render_regressions(&mut out, &self.regression_imagery_entertainment)
            }
            "fisher_timbre_imagery" => render_fisher(&mut out, &self.fisher_timbre_imagery),
            "fisher_imagery_entertainment" => render_fisher(&mut out, &self.fisher_imagery_entertainment),
            "wilcoxon" => render_wilcoxon(&mut out, &self.wilcoxon),
            other => {
                return Err(StatsError::DegenerateInput(format!("unknown table family `{other}`")))
            }
        }
        Ok(out)
    }

    /// Writes `<family>.json` and `<family>.txt` for every family under `dir`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for family in FAMILIES {
            let json = dir.join(format!("{family}.json"));
            std::fs::write(&json, self.family_json(family)?)?;
            let txt = dir.join(format!("{family}.txt"));
            std::fs::write(&txt, self.family_text(family)?)?;
            written.push(json);
            written.push(txt);
        }
        Ok(written)
    }

    fn render_kruskal(&self, out: &mut String) {
        let _ = writeln!(out, "Kruskal-Wallis across conditions A, B, C ({} participants)\n", self.participants);
        let rows: Vec<Vec<String>> = self
            .kruskal_wallis
            .iter()
            .map(|r| {
                vec![
                    r.survey.to_string(),
                    r.feature.to_string(),
                    fmt4(r.h),
                    fmt_p(r.p_value),
                    r.stars.to_string(),
                    fmt4(r.mean_a),
                    fmt4(r.mean_b),
                    fmt4(r.mean_c),
                ]
            })
            .collect();
        render_table(
            out,
            &["survey", "feature", "H", "p_value", "sig", "mean_A", "mean_B", "mean_C"],
            &rows,
        );
    }
}

fn render_regressions(out: &mut String, tables: &[RegressionTable]) {
    for table in tables {
        let Some(first) = table.rows.first() else { continue };
        let _ = writeln!(
            out,
            "Multiple linear regression {} -> {}, condition {} ({})",
            table.iv_survey,
            table.dv_survey,
            first.condition,
            first.condition.description()
        );
        let rows: Vec<Vec<String>> = table
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.iv.clone(),
                    r.dv.to_string(),
                    fmt4(r.coefficient),
                    fmt4(r.std_err),
                    fmt4(r.t_value),
                    fmt_p(r.p_value),
                    r.stars.to_string(),
                    fmt4(r.r_squared),
                    fmt4(r.adj_r_squared),
                    format!("F({}, {})={}", r.df_model, r.df_resid, fmt4(r.f_statistic)),
                    fmt_p(r.f_p_value),
                    r.f_stars.to_string(),
                ]
            })
            .collect();
        render_table(
            out,
            &[
                "IV",
                "DV",
                "coefficients",
                "std_err",
                "t_value",
                "p_value",
                "sig",
                "R-squared",
                "Adj. R-squared",
                "F-Statistic",
                "F p_value",
                "F sig",
            ],
            &rows,
        );
        out.push('\n');
    }
}

fn render_fisher(out: &mut String, tables: &[FisherTable]) {
    for table in tables {
        let _ = writeln!(
            out,
            "Fisher transformation {} -> {} ({} {} vs. {} {})",
            table.iv_survey,
            table.dv_survey,
            table.first,
            table.first.description(),
            table.second,
            table.second.description()
        );
        let rows: Vec<Vec<String>> = table
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.iv.clone(),
                    r.dv.to_string(),
                    fmt4(r.r1),
                    fmt4(r.r2),
                    r.z_stat.map_or_else(|| "n/a".to_string(), fmt4),
                    r.p_value.map_or_else(|| "n/a".to_string(), fmt_p),
                    r.stars.to_string(),
                ]
            })
            .collect();
        let c1 = format!("coef {}", table.first);
        let c2 = format!("coef {}", table.second);
        render_table(out, &["IV", "DV", &c1, &c2, "z", "p_value", "sig"], &rows);
        out.push('\n');
    }
}

fn render_wilcoxon(out: &mut String, tables: &[WilcoxonTable]) {
    for table in tables {
        let _ = writeln!(
            out,
            "Wilcoxon signed-rank, {} survey, {} vs. {}",
            table.survey, table.first, table.second
        );
        let cells = |r: &WilcoxonRow| {
            vec![
                format!("{} (p={})", r.feature, fmt_p(r.p_value)),
                r.stars.to_string(),
                fmt4(r.mean_first),
                fmt4(r.mean_second),
            ]
        };
        let sig: Vec<Vec<String>> = table.significant().map(cells).collect();
        let not_sig: Vec<Vec<String>> = table.not_significant().map(cells).collect();
        let rows: Vec<Vec<String>> = (0..sig.len().max(not_sig.len()))
            .map(|i| {
                let blank = || vec![String::new(); 4];
                let mut row = sig.get(i).cloned().unwrap_or_else(blank);
                row.extend(not_sig.get(i).cloned().unwrap_or_else(blank));
                row
            })
            .collect();
        let (a, b) = (table.first.to_string(), table.second.to_string());
        render_table(
            out,
            &["Significant", "sig", &a, &b, "Not Significant", "sig", &a, &b],
            &rows,
        );
        out.push('\n');
    }
}
