//! Survey answers: the fixed questionnaire vocabularies, CSV ingestion and
//! per-participant aggregation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Result, StatsError};

/// Timbre survey items, in questionnaire order.
pub const TIMBRE_FEATURES: [&str; 12] = [
    "hard", "soft", "deep", "shallow", "bright", "dark", "warm", "cold", "rough", "smooth",
    "sharp", "blunt",
];

/// Imagery survey items, in questionnaire order.
pub const IMAGERY_FEATURES: [&str; 5] = ["flow", "force", "interior", "movement", "wandering"];

/// Entertainment survey items, in questionnaire order.
pub const ENTERTAINMENT_FEATURES: [&str; 8] = [
    "stimulated",
    "dancing",
    "entertained",
    "energized",
    "moving",
    "animated",
    "excited",
    "rhythm",
];

pub const CSV_HEADER: [&str; 6] = [
    "participant_id",
    "music_id",
    "condition",
    "survey",
    "feature",
    "score",
];

pub const MUSIC_COUNT: u8 = 20;
pub const LIKERT_MIN: u8 = 1;
pub const LIKERT_MAX: u8 = 7;

/// Listening condition of one experience.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Condition {
    /// Music only.
    A,
    /// Music with a loudness-driven visualization.
    B,
    /// Music with the timbre visualization.
    C,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::A, Condition::B, Condition::C];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "A" | "a" => Some(Condition::A),
            "B" | "b" => Some(Condition::B),
            "C" | "c" => Some(Condition::C),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Condition::A => "A",
            Condition::B => "B",
            Condition::C => "C",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Condition::A => "Only Music",
            Condition::B => "Basic Visualization",
            Condition::C => "Timbre Visualization",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which questionnaire an answer belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Survey {
    Timbre,
    Imagery,
    Entertainment,
}

impl Survey {
    pub const ALL: [Survey; 3] = [Survey::Timbre, Survey::Imagery, Survey::Entertainment];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "timbre" => Some(Survey::Timbre),
            "imagery" => Some(Survey::Imagery),
            "entertainment" => Some(Survey::Entertainment),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Survey::Timbre => "timbre",
            Survey::Imagery => "imagery",
            Survey::Entertainment => "entertainment",
        }
    }

    pub fn features(self) -> &'static [&'static str] {
        match self {
            Survey::Timbre => &TIMBRE_FEATURES,
            Survey::Imagery => &IMAGERY_FEATURES,
            Survey::Entertainment => &ENTERTAINMENT_FEATURES,
        }
    }

    /// Resolves `name` against this survey's vocabulary.
    pub fn feature(self, name: &str) -> Option<&'static str> {
        self.features().iter().copied().find(|f| *f == name)
    }
}

impl fmt::Display for Survey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One Likert answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SurveyRecord {
    pub participant_id: String,
    pub music_id: u8,
    pub condition: Condition,
    pub survey: Survey,
    pub feature: &'static str,
    pub score: u8,
}

impl SurveyRecord {
    fn key(&self) -> (String, u8, Condition, Survey, &'static str) {
        (
            self.participant_id.clone(),
            self.music_id,
            self.condition,
            self.survey,
            self.feature,
        )
    }
}

pub fn load_survey_csv(path: impl AsRef<Path>) -> Result<Vec<SurveyRecord>> {
    let file = std::fs::File::open(path)?;
    parse_survey_csv(file)
}

/// Parses and validates survey rows. Errors carry the 1-based line number.
pub fn parse_survey_csv<R: Read>(input: R) -> Result<Vec<SurveyRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut header_checked = false;

    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        if !header_checked {
            header_checked = true;
            if row.iter().ne(CSV_HEADER.iter().copied()) {
                return Err(StatsError::BadHeader {
                    line,
                    found: row.iter().collect::<Vec<_>>().join(","),
                });
            }
            continue;
        }
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() != 6 {
            return Err(StatsError::WrongFieldCount {
                line,
                found: row.len(),
            });
        }

        let participant_id = row[0].to_string();
        let music_id = row[1]
            .parse::<u8>()
            .ok()
            .filter(|m| (1..=MUSIC_COUNT).contains(m))
            .ok_or_else(|| StatsError::InvalidMusicId {
                line,
                value: row[1].to_string(),
            })?;
        let condition = Condition::parse(&row[2]).ok_or_else(|| StatsError::InvalidCondition {
            line,
            value: row[2].to_string(),
        })?;
        let survey = Survey::parse(&row[3]).ok_or_else(|| StatsError::InvalidSurvey {
            line,
            value: row[3].to_string(),
        })?;
        let feature = survey
            .feature(&row[4])
            .ok_or_else(|| StatsError::InvalidFeature {
                line,
                survey: survey.name().to_string(),
                feature: row[4].to_string(),
            })?;
        let score = row[5]
            .parse::<u8>()
            .ok()
            .filter(|s| (LIKERT_MIN..=LIKERT_MAX).contains(s))
            .ok_or_else(|| StatsError::ScoreOutOfRange {
                line,
                value: row[5].to_string(),
            })?;

        let record = SurveyRecord {
            participant_id,
            music_id,
            condition,
            survey,
            feature,
            score,
        };
        if !seen.insert(record.key()) {
            return Err(StatsError::DuplicateKey {
                line,
                key: format!(
                    "{}, {}, {}, {}, {}",
                    record.participant_id, music_id, condition, survey, feature
                ),
            });
        }
        records.push(record);
    }

    if !header_checked {
        return Err(StatsError::BadHeader {
            line: 1,
            found: String::new(),
        });
    }
    Ok(records)
}

/// Distinct participant ids, sorted.
pub fn participants(records: &[SurveyRecord]) -> Vec<String> {
    records
        .iter()
        .map(|r| r.participant_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantMean {
    pub participant_id: String,
    pub mean: f64,
}

/// Mean score of every participant over the music pieces they rated in one
/// (survey, feature, condition) cell. Output is ordered by participant id.
///
/// Every participant present anywhere in `records` must have at least one
/// answer in the cell, otherwise `MissingCell` is returned.
pub fn aggregate_participant_means(
    records: &[SurveyRecord],
    survey: Survey,
    feature: &str,
    condition: Condition,
) -> Result<Vec<ParticipantMean>> {
    let mut sums: BTreeMap<&str, (f64, usize)> = participants_ref(records)
        .into_iter()
        .map(|p| (p, (0.0, 0)))
        .collect();

    for r in records
        .iter()
        .filter(|r| r.survey == survey && r.condition == condition && r.feature == feature)
    {
        let entry = sums
            .get_mut(r.participant_id.as_str())
            .expect("participant collected above");
        entry.0 += f64::from(r.score);
        entry.1 += 1;
    }

    let cell = format!("({survey}, {feature}, {condition})");
    if sums.is_empty() {
        return Err(StatsError::MissingCell {
            participant: String::new(),
            cell,
        });
    }
    sums.into_iter()
        .map(|(p, (sum, count))| {
            if count == 0 {
                Err(StatsError::MissingCell {
                    participant: p.to_string(),
                    cell: cell.clone(),
                })
            } else {
                Ok(ParticipantMean {
                    participant_id: p.to_string(),
                    mean: sum / count as f64,
                })
            }
        })
        .collect()
}

fn participants_ref(records: &[SurveyRecord]) -> BTreeSet<&str> {
    records.iter().map(|r| r.participant_id.as_str()).collect()
}
