//! Prompt layout and output grammars shared by the pipeline and providers.
//!
//! Every prompt starts with exactly one directive header line naming the
//! task. Sections follow in this order, each introduced by its marker on a
//! line of its own and ended by a blank line:
//!
//! ```text
//! ### TASK: GENERATE QUIZ QUESTIONS
//! <role sentence>
//!
//! [PARAMETERS]
//! key: value
//!
//! [EXAMPLES]
//! <<<EXAMPLE 1>>>
//! ...exemplar text, verbatim...
//! <<<END EXAMPLE 1>>>
//!
//! [CONVERSATION]        (chat only)
//! learner: ...
//! assistant: ...
//!
//! [MESSAGE]             (chat only)
//! ...
//!
//! [STEPS]
//! 1. ...
//!
//! [OUTPUT FORMAT]
//! ...
//! ```
//!
//! Question output, one block per question; markers are case-insensitive and
//! an optional `1.` / `1)` numbering prefix before `Q:` is allowed:
//!
//! ```text
//! 1. Q: What does `break` do inside a loop?
//! A) Skips one iteration
//! B) Exits the loop
//! C) Restarts the loop
//! D) Nothing
//! ANSWER: B
//! EXPLANATION: `break` leaves the innermost loop immediately.
//! ```
//!
//! Roadmap output, one block per milestone:
//!
//! ```text
//! MILESTONE: Getting started with variables
//! WEEKS: 1-2
//! TOPICS: variables, loops
//! LESSONS: Declaring variables; Writing a for loop
//! ```
//!
//! Tip, quote, chat and explanation outputs are free text; an optional
//! leading `TIP:`, `QUOTE:`, `REPLY:` or `EXPLANATION:` label is stripped.

pub const HEADER_QUESTIONS: &str = "### TASK: GENERATE QUIZ QUESTIONS";
pub const HEADER_EXPLANATION: &str = "### TASK: EXPLAIN QUESTION";
pub const HEADER_CHAT: &str = "### TASK: SUPPORTIVE CHAT REPLY";
pub const HEADER_ROADMAP: &str = "### TASK: LEARNING ROADMAP";
pub const HEADER_TIP: &str = "### TASK: TIP OF THE DAY";
pub const HEADER_QUOTE: &str = "### TASK: QUIZ FEEDBACK QUOTE";

pub const ALL_HEADERS: [&str; 6] = [
    HEADER_QUESTIONS,
    HEADER_EXPLANATION,
    HEADER_CHAT,
    HEADER_ROADMAP,
    HEADER_TIP,
    HEADER_QUOTE,
];

pub const SECTION_PARAMETERS: &str = "[PARAMETERS]";
pub const SECTION_EXAMPLES: &str = "[EXAMPLES]";
pub const SECTION_CONVERSATION: &str = "[CONVERSATION]";
pub const SECTION_MESSAGE: &str = "[MESSAGE]";
pub const SECTION_STEPS: &str = "[STEPS]";
pub const SECTION_OUTPUT: &str = "[OUTPUT FORMAT]";

pub const PARAM_TOPIC: &str = "topic";
pub const PARAM_DIFFICULTY: &str = "difficulty";
pub const PARAM_COUNT: &str = "count";
pub const PARAM_TIMELINE_WEEKS: &str = "timeline_weeks";
/// JSON array of strings.
pub const PARAM_TOPICS: &str = "topics";
pub const PARAM_LANGUAGE: &str = "language";
pub const PARAM_CATEGORY: &str = "category";
pub const PARAM_CONDITION: &str = "condition";
pub const PARAM_QUESTION: &str = "question";
pub const PARAM_ANSWER: &str = "answer";

pub fn example_open(n: usize) -> String {
    format!("<<<EXAMPLE {n}>>>")
}

pub fn example_close(n: usize) -> String {
    format!("<<<END EXAMPLE {n}>>>")
}

/// The directive header on the first line of `prompt`, if it is one of ours.
pub fn directive_of(prompt: &str) -> Option<&'static str> {
    let first = prompt.lines().next()?.trim();
    ALL_HEADERS.iter().copied().find(|h| *h == first)
}

/// `key: value` lines of the `[PARAMETERS]` section, in order.
pub fn parameters_of(prompt: &str) -> Vec<(String, String)> {
    let mut lines = prompt.lines().skip_while(|l| l.trim() != SECTION_PARAMETERS);
    lines.next();
    lines
        .take_while(|l| !l.trim().is_empty())
        .filter_map(|l| {
            let (k, v) = l.split_once(':')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

pub fn parameter<'a>(params: &'a [(String, String)], key: &str) -> Option<&'a str> {
    params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

/// Exemplar bodies of the `[EXAMPLES]` section, in order.
pub fn examples_of(prompt: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = prompt;
    let mut n = 1;
    loop {
        let open = example_open(n);
        let close = example_close(n);
        let Some(start) = rest.find(&open) else { break };
        let body_start = start + open.len();
        let Some(end) = rest[body_start..].find(&close) else { break };
        let body = &rest[body_start..body_start + end];
        out.push(body.strip_prefix('\n').unwrap_or(body).trim_end_matches('\n').to_string());
        rest = &rest[body_start + end + close.len()..];
        n += 1;
    }
    out
}

/// Strip an optional `LABEL:` prefix (case-insensitive) and surrounding
/// whitespace from free-text output.
pub fn strip_label<'a>(text: &'a str, label: &str) -> &'a str {
    let trimmed = text.trim();
    match trimmed.get(..label.len()) {
        Some(head) if head.eq_ignore_ascii_case(label) => {
            match trimmed[label.len()..].strip_prefix(':') {
                Some(rest) => rest.trim(),
                None => trimmed,
            }
        }
        _ => trimmed,
    }
}
