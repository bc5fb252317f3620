//! Listening-survey aggregation.
//!
//! Six tracks (M1..M6) are scored 1..5 on three criteria by each
//! respondent; respondents also multi-select which tracks they believe
//! were machine-composed and which they had heard before. Aggregation is
//! exact rational arithmetic throughout; rounding happens only at the
//! display boundary (half-up).
//!
//! Criterion means are published at one decimal and the overall column is
//! the mean of those published values shown at two decimals, which is the
//! arithmetic that actually reproduces the reference tables. (Computing
//! the overall from unrounded means cannot print those values for any
//! integer-score dataset over this respondent count.)

use crate::rational::{format_fixed, round_half_up};
use num_rational::Rational64;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("no responses")]
    Empty,
    #[error("row {line}: {detail}")]
    Row { line: usize, detail: String },
    #[error("respondent {respondent}: score for {track} criterion {criterion} is {value}, must be 1..=5")]
    BadScore {
        respondent: String,
        track: TrackId,
        criterion: &'static str,
        value: i64,
    },
    #[error("respondent {respondent} is missing {what}")]
    Missing { respondent: String, what: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrackId {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
}

impl TrackId {
    pub const ALL: [TrackId; 6] = [
        TrackId::M1,
        TrackId::M2,
        TrackId::M3,
        TrackId::M4,
        TrackId::M5,
        TrackId::M6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrackId::M1 => "M1",
            TrackId::M2 => "M2",
            TrackId::M3 => "M3",
            TrackId::M4 => "M4",
            TrackId::M5 => "M5",
            TrackId::M6 => "M6",
        }
    }

    pub fn parse(text: &str) -> Option<TrackId> {
        Self::ALL.into_iter().find(|t| t.name() == text)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const CRITERIA: [&str; 3] = ["interval", "rhythm", "melody"];

/// One listener's answers: per-track criterion scores plus the two
/// multi-select questions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveyResponse {
    pub respondent: String,
    /// scores[track][criterion], each 1..=5.
    pub scores: [[u8; 3]; 6],
    pub distinguished_as_ai: [bool; 6],
    pub distinguished_not_sure: bool,
    pub heard_before: [bool; 6],
    pub heard_none: bool,
}

/// Comma-separated survey rows: id, 18 score columns (track-major:
/// M1 interval, M1 rhythm, M1 melody, M2 interval, …), then the two
/// semicolon-joined multi-select columns. A header row is skipped.
pub fn parse_responses(text: &str) -> Result<Vec<SurveyResponse>, SurveyError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 && line.starts_with("id,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 21 {
            return Err(SurveyError::Row {
                line: lineno + 1,
                detail: format!("expected 21 comma-separated fields, got {}", fields.len()),
            });
        }
        let respondent = fields[0].trim().to_string();
        if respondent.is_empty() {
            return Err(SurveyError::Row {
                line: lineno + 1,
                detail: "empty respondent id".into(),
            });
        }
        let mut scores = [[0u8; 3]; 6];
        for track in TrackId::ALL {
            for (ci, criterion) in CRITERIA.iter().enumerate() {
                let field = fields[1 + track.index() * 3 + ci].trim();
                if field.is_empty() {
                    return Err(SurveyError::Missing {
                        respondent,
                        what: format!("{track} {criterion} score"),
                    });
                }
                let value: i64 = field.parse().map_err(|_| SurveyError::Row {
                    line: lineno + 1,
                    detail: format!("score {field:?} is not an integer"),
                })?;
                if !(1..=5).contains(&value) {
                    return Err(SurveyError::BadScore {
                        respondent,
                        track,
                        criterion,
                        value,
                    });
                }
                scores[track.index()][ci] = value as u8;
            }
        }
        let (distinguished_as_ai, distinguished_not_sure) =
            parse_multiselect(fields[19], "not_sure", lineno + 1)?;
        let (heard_before, heard_none) = parse_multiselect(fields[20], "none", lineno + 1)?;
        out.push(SurveyResponse {
            respondent,
            scores,
            distinguished_as_ai,
            distinguished_not_sure,
            heard_before,
            heard_none,
        });
    }
    Ok(out)
}

fn parse_multiselect(
    field: &str,
    extra: &str,
    line: usize,
) -> Result<([bool; 6], bool), SurveyError> {
    let mut tracks = [false; 6];
    let mut extra_selected = false;
    for token in field.split(';') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        if token.eq_ignore_ascii_case(extra) || token.eq_ignore_ascii_case("not sure") && extra == "not_sure" {
            extra_selected = true;
        } else if let Some(track) = TrackId::parse(token) {
            tracks[track.index()] = true;
        } else {
            return Err(SurveyError::Row {
                line,
                detail: format!("unknown selection {token:?}"),
            });
        }
    }
    Ok((tracks, extra_selected))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreRow {
    pub track: TrackId,
    /// Full-precision criterion means.
    pub interval: Rational64,
    pub rhythm: Rational64,
    pub melody: Rational64,
    /// Mean of the three published (one-decimal) criterion means.
    pub overall: Rational64,
}

impl ScoreRow {
    pub fn published_interval(&self) -> Rational64 {
        round_half_up(self.interval, 1)
    }

    pub fn published_rhythm(&self) -> Rational64 {
        round_half_up(self.rhythm, 1)
    }

    pub fn published_melody(&self) -> Rational64 {
        round_half_up(self.melody, 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreTable {
    pub rows: [ScoreRow; 6],
    pub respondents: usize,
}

/// Per-track criterion means and the overall column.
pub fn aggregate_scores(responses: &[SurveyResponse]) -> Result<ScoreTable, SurveyError> {
    if responses.is_empty() {
        return Err(SurveyError::Empty);
    }
    let n = responses.len() as i64;
    let rows = TrackId::ALL.map(|track| {
        let mut sums = [0i64; 3];
        for r in responses {
            for (ci, sum) in sums.iter_mut().enumerate() {
                *sum += r.scores[track.index()][ci] as i64;
            }
        }
        let mean = |s: i64| Rational64::new(s, n);
        let row = ScoreRow {
            track,
            interval: mean(sums[0]),
            rhythm: mean(sums[1]),
            melody: mean(sums[2]),
            overall: Rational64::from_integer(0),
        };
        let overall = (row.published_interval() + row.published_rhythm() + row.published_melody())
            / Rational64::from_integer(3);
        ScoreRow { overall, ..row }
    });
    Ok(ScoreTable {
        rows,
        respondents: responses.len(),
    })
}

impl ScoreTable {
    /// Aligned text: criterion means at one decimal, overall at two.
    pub fn render_text(&self) -> String {
        let mut out = String::from("track  interval  rhythm  melody  overall\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{:<5}  {:>8}  {:>6}  {:>6}  {:>7}\n",
                row.track.name(),
                format_fixed(row.published_interval(), 1),
                format_fixed(row.published_rhythm(), 1),
                format_fixed(row.published_melody(), 1),
                format_fixed(row.overall, 2),
            ));
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("track,interval,rhythm,melody,overall\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.track.name(),
                format_fixed(row.published_interval(), 1),
                format_fixed(row.published_rhythm(), 1),
                format_fixed(row.published_melody(), 1),
                format_fixed(row.overall, 2),
            ));
        }
        out
    }

    pub fn overall_display(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| format_fixed(r.overall, 2))
            .collect()
    }
}

/// Percentage table for one multi-select question: six tracks plus the
/// extra option ("Not sure" / "Have not heard").
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateTable {
    pub title: &'static str,
    pub extra_label: &'static str,
    /// Rates as exact percentages, tracks first, the extra option last.
    pub rates: [Rational64; 7],
    pub counts: [usize; 7],
    pub respondents: usize,
}

fn rate_table(
    title: &'static str,
    extra_label: &'static str,
    responses: &[SurveyResponse],
    select: impl Fn(&SurveyResponse) -> ([bool; 6], bool),
) -> Result<RateTable, SurveyError> {
    if responses.is_empty() {
        return Err(SurveyError::Empty);
    }
    let n = responses.len();
    let mut counts = [0usize; 7];
    for r in responses {
        let (tracks, extra) = select(r);
        for (i, &picked) in tracks.iter().enumerate() {
            if picked {
                counts[i] += 1;
            }
        }
        if extra {
            counts[6] += 1;
        }
    }
    let rates = counts.map(|c| Rational64::new(100 * c as i64, n as i64));
    Ok(RateTable {
        title,
        extra_label,
        rates,
        counts,
        respondents: n,
    })
}

/// Per-option share of respondents who marked the track as machine-made.
/// Options are independent; columns need not sum to 100.
pub fn distinguish_rates(responses: &[SurveyResponse]) -> Result<RateTable, SurveyError> {
    rate_table(
        "distinguished as machine-composed",
        "Not sure",
        responses,
        |r| (r.distinguished_as_ai, r.distinguished_not_sure),
    )
}

/// Per-option share of respondents who had heard the track before.
pub fn familiarity_rates(responses: &[SurveyResponse]) -> Result<RateTable, SurveyError> {
    rate_table("heard before the test", "Have not heard", responses, |r| {
        (r.heard_before, r.heard_none)
    })
}

impl RateTable {
    pub fn option_names(&self) -> [String; 7] {
        let mut names: Vec<String> = TrackId::ALL.iter().map(|t| t.name().to_string()).collect();
        names.push(self.extra_label.to_string());
        names.try_into().expect("seven options")
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("{} (% of {} respondents)\n", self.title, self.respondents);
        for (name, rate) in self.option_names().iter().zip(&self.rates) {
            out.push_str(&format!("{:<14} {:>6}\n", name, format_fixed(*rate, 2)));
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("option,percent\n");
        for (name, rate) in self.option_names().iter().zip(&self.rates) {
            out.push_str(&format!("{},{}\n", name, format_fixed(*rate, 2)));
        }
        out
    }

    pub fn display_rates(&self) -> Vec<String> {
        self.rates.iter().map(|r| format_fixed(*r, 2)).collect()
    }
}

/// Finds every respondent count in 1..=max for which all given two-decimal
/// percentages are exactly representable as round(100·k/N). Used to audit
/// the reconstruction of the survey size from published rates.
pub fn matching_denominators(percentages: &[Rational64], max_n: usize) -> Vec<usize> {
    (1..=max_n)
        .filter(|&n| {
            percentages.iter().all(|&p| {
                (0..=n).any(|k| {
                    round_half_up(Rational64::new(100 * k as i64, n as i64), 2) == p
                })
            })
        })
        .collect()
}
