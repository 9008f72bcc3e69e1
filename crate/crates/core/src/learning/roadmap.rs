//! Roadmap parsing, validation and the deterministic fallback planner.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::types::normalize_topic;

/// Longest plan accepted, in weeks.
pub const MAX_TIMELINE_WEEKS: u32 = 104;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milestone {
    pub title: String,
    pub topics: Vec<String>,
    pub start_week: u32,
    pub end_week: u32,
    pub lessons: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoadmapSource {
    Generated,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roadmap {
    pub user_id: String,
    pub timeline_weeks: u32,
    pub language: String,
    pub milestones: Vec<Milestone>,
    pub source: RoadmapSource,
    pub created_at: DateTime<Utc>,
}

/// Trims, lowercases and de-duplicates requested topics, keeping order.
pub fn normalize_topics(topics: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in topics {
        let t = normalize_topic(t);
        if !t.is_empty() && !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

/// Checks week bounds, ordering without overlap, and that the milestones
/// partition `topics` exactly (each requested topic appears exactly once).
pub fn validate_milestones(milestones: &[Milestone], timeline_weeks: u32, topics: &[String]) -> Result<(), String> {
    if milestones.is_empty() {
        return Err("roadmap has no milestones".into());
    }
    let mut previous_end = 0u32;
    for (i, m) in milestones.iter().enumerate() {
        let n = i + 1;
        if m.title.trim().is_empty() {
            return Err(format!("milestone {n} has no title"));
        }
        if m.start_week < 1 || m.start_week > m.end_week || m.end_week > timeline_weeks {
            return Err(format!(
                "milestone {n} spans weeks {}-{} outside 1-{timeline_weeks}",
                m.start_week, m.end_week
            ));
        }
        if m.start_week <= previous_end {
            return Err(format!("milestone {n} overlaps or precedes the previous milestone"));
        }
        if m.topics.is_empty() {
            return Err(format!("milestone {n} has no topics"));
        }
        previous_end = m.end_week;
    }
    let mut seen: Vec<&String> = milestones.iter().flat_map(|m| &m.topics).collect();
    let assigned = seen.len();
    seen.sort();
    seen.dedup();
    if seen.len() != assigned {
        return Err("a topic is assigned to more than one milestone".into());
    }
    let mut wanted: Vec<&String> = topics.iter().collect();
    wanted.sort();
    if seen != wanted {
        return Err("milestone topics do not match the requested topics".into());
    }
    Ok(())
}

fn parse_weeks(value: &str) -> Option<(u32, u32)> {
    let value = value.trim().trim_start_matches(|c: char| c.is_alphabetic() || c.is_whitespace());
    let mut parts = value.split(['-', '–']).map(str::trim);
    let start = parts.next()?.parse().ok()?;
    let end = match parts.next() {
        Some(e) => e.parse().ok()?,
        None => start,
    };
    if parts.next().is_some() {
        return None;
    }
    Some((start, end))
}

fn after_colon(line: &str) -> &str {
    line.split_once(':').map_or("", |(_, rest)| rest.trim())
}

fn split_list(value: &str, separators: &[char]) -> Vec<String> {
    value
        .split(separators)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Parses `MILESTONE:` / `WEEKS:` / `TOPICS:` / `LESSONS:` blocks. Topics
/// are normalized; validation is left to [`validate_milestones`].
pub fn parse_roadmap(text: &str) -> Result<Vec<Milestone>, String> {
    let mut milestones: Vec<Milestone> = Vec::new();
    let mut weeks_seen: Vec<bool> = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let upper = line.to_ascii_uppercase();
        if upper.starts_with("MILESTONE") && line.contains(':') {
            milestones.push(Milestone {
                title: after_colon(line).to_string(),
                topics: Vec::new(),
                start_week: 0,
                end_week: 0,
                lessons: Vec::new(),
            });
            weeks_seen.push(false);
            continue;
        }
        let Some(current) = milestones.last_mut() else {
            continue;
        };
        if upper.starts_with("WEEKS") && line.contains(':') {
            let (start, end) = parse_weeks(after_colon(line))
                .ok_or_else(|| format!("line {}: unreadable week range", line_no + 1))?;
            current.start_week = start;
            current.end_week = end;
            if let Some(flag) = weeks_seen.last_mut() {
                *flag = true;
            }
        } else if upper.starts_with("TOPICS") && line.contains(':') {
            current.topics = split_list(after_colon(line), &[','])
                .iter()
                .map(|t| normalize_topic(t))
                .collect();
        } else if upper.starts_with("LESSONS") && line.contains(':') {
            current.lessons = split_list(after_colon(line), &[';']);
        } else if let Some(item) = line.strip_prefix("- ") {
            current.lessons.push(item.trim().to_string());
        }
    }
    if milestones.is_empty() {
        return Err("no MILESTONE blocks found".into());
    }
    if let Some(i) = weeks_seen.iter().position(|seen| !seen) {
        return Err(format!("milestone {} has no WEEKS line", i + 1));
    }
    Ok(milestones)
}

/// Splits topics, in order, into `m = min(weeks, topics)` consecutive groups
/// over consecutive week ranges, both as even as integer division allows.
pub fn fallback_milestones(timeline_weeks: u32, topics: &[String], language: &str) -> Vec<Milestone> {
    let weeks = timeline_weeks.max(1) as usize;
    let n = topics.len();
    let m = weeks.min(n);
    (0..m)
        .map(|g| {
            let group = topics[g * n / m..(g + 1) * n / m].to_vec();
            let lessons = group
                .iter()
                .flat_map(|t| {
                    [
                        format!("Learn the basics of {t} in {language}"),
                        format!("Practise {t} with a short {language} exercise"),
                    ]
                })
                .collect();
            Milestone {
                title: format!("Part {}: {}", g + 1, group.join(", ")),
                start_week: (g * weeks / m + 1) as u32,
                end_week: ((g + 1) * weeks / m) as u32,
                topics: group,
                lessons,
            }
        })
        .collect()
}

/// Worked example shown to the provider.
pub const EXAMPLE_ROADMAP: &str = "\
timeline_weeks: 6; language: javascript; topics: [\"variables\", \"conditionals\", \"loops\", \"functions\"]
MILESTONE: Getting comfortable with values
WEEKS: 1-2
TOPICS: variables, conditionals
LESSONS: Declare and print variables; Compare values with if and else; Write a tiny grade calculator
MILESTONE: Repeating and reusing code
WEEKS: 3-6
TOPICS: loops, functions
LESSONS: Count with for loops; Stop a while loop safely; Write and call your own functions; Refactor the calculator into functions";
