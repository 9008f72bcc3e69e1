use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Completion, GenerationRequest, ProviderError, TextProvider};
use crate::protocol::{self, parameter};
use crate::vector::Embedding;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Offline provider whose outputs are pure functions of their inputs.
///
/// Embeddings are hashed bags of tokens: lowercase the text, split on
/// non-alphanumerics, hash every token (FNV-1a 64) into one of `dimension`
/// buckets, count, then L2-normalize. Completions recognize the directive
/// headers in [`crate::protocol`] and emit well-formed filler seeded by a
/// hash of the prompt.
#[derive(Debug, Clone)]
pub struct MockProvider {
    dimension: usize,
}

impl MockProvider {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        MockProvider { dimension }
    }
}

impl Default for MockProvider {
    fn default() -> Self {
        MockProvider::new(super::DEFAULT_EMBED_DIMENSION)
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Lowercased alphanumeric runs of `text`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// The mock embedding of one text. Text with no alphanumeric run is hashed
/// as a single token so that every non-blank input gets a unit vector.
pub fn mock_embedding(text: &str, dimension: usize) -> Option<Embedding> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return None;
    }
    let mut tokens = tokenize(trimmed);
    if tokens.is_empty() {
        tokens.push(trimmed.to_lowercase());
    }
    let mut counts = vec![0.0f64; dimension];
    for token in &tokens {
        counts[(fnv1a64(token.as_bytes()) % dimension as u64) as usize] += 1.0;
    }
    Embedding::new(counts).ok()?.normalized()
}

impl TextProvider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &GenerationRequest) -> Result<Completion, ProviderError> {
        if request.prompt.trim().is_empty() {
            return Err(ProviderError::EmptyPrompt);
        }
        let raw = respond(&request.prompt);
        Ok(finish(raw, request))
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, ProviderError> {
        if let Some(index) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(ProviderError::EmptyText { index });
        }
        let dim = self.dimension;
        let embed_one = |t: &String| mock_embedding(t, dim).expect("non-blank text embeds");
        #[cfg(feature = "parallel")]
        let out = texts.par_iter().map(embed_one).collect();
        #[cfg(not(feature = "parallel"))]
        let out = texts.iter().map(embed_one).collect();
        Ok(out)
    }

    fn embed_dimension(&self) -> usize {
        self.dimension
    }
}

/// Apply stop markers and the length limit.
fn finish(mut text: String, request: &GenerationRequest) -> Completion {
    if let Some(cut) = request
        .stop_markers
        .iter()
        .filter(|m| !m.is_empty())
        .filter_map(|m| text.find(m.as_str()))
        .min()
    {
        text.truncate(cut);
    }
    let mut words = 0;
    let mut in_word = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            in_word = false;
        } else if !in_word {
            in_word = true;
            words += 1;
            if words > request.max_output_length {
                let kept = text[..i].trim_end().to_string();
                return Completion {
                    text: kept,
                    truncated: true,
                };
            }
        }
    }
    Completion {
        text,
        truncated: false,
    }
}

pub(crate) const SUPPORTIVE_ECHO: &str =
    "Thanks for reaching out. Learning to code takes patience, and every small step you take counts.";

fn respond(prompt: &str) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(prompt.as_bytes()));
    let params = protocol::parameters_of(prompt);
    match protocol::directive_of(prompt) {
        Some(protocol::HEADER_QUESTIONS) => questions(&params, &mut rng),
        Some(protocol::HEADER_EXPLANATION) => explanation(&params),
        Some(protocol::HEADER_CHAT) => chat(prompt, &mut rng),
        Some(protocol::HEADER_ROADMAP) => roadmap(&params),
        Some(protocol::HEADER_TIP) => tip(&params, &mut rng),
        Some(protocol::HEADER_QUOTE) => quote(&params, &mut rng),
        _ => SUPPORTIVE_ECHO.to_string(),
    }
}

const ASPECTS: [&str; 8] = [
    "edge cases",
    "control flow",
    "naming",
    "state changes",
    "return values",
    "off-by-one errors",
    "performance",
    "readability",
];

fn questions(params: &[(String, String)], rng: &mut ChaCha8Rng) -> String {
    let topic = parameter(params, protocol::PARAM_TOPIC).unwrap_or("programming");
    let difficulty = parameter(params, protocol::PARAM_DIFFICULTY).unwrap_or("beginner");
    let count = parameter(params, protocol::PARAM_COUNT)
        .and_then(|c| c.parse::<usize>().ok())
        .unwrap_or(1);
    let mut out = String::new();
    for n in 1..=count {
        let aspect = ASPECTS.choose(rng).copied().unwrap_or("control flow");
        let tag: u16 = rng.random();
        let correct = rng.random_range(0..4usize);
        let distractors = [
            format!("{topic} never involves {aspect}"),
            format!("{aspect} only matters for compiled languages"),
            format!("{aspect} is decided by the editor, not the code"),
        ];
        let right = format!("{topic} code must handle {aspect} deliberately");
        let mut options: Vec<String> = distractors.to_vec();
        options.insert(correct, right);
        out.push_str(&format!(
            "{n}. Q: ({difficulty}) Which statement about {aspect} in {topic} is true? [ref {tag:04x}-{n}]\n"
        ));
        for (letter, option) in ['A', 'B', 'C', 'D'].iter().zip(&options) {
            out.push_str(&format!("{letter}) {option}\n"));
        }
        out.push_str(&format!("ANSWER: {}\n", (b'A' + correct as u8) as char));
        out.push_str(&format!(
            "EXPLANATION: At the {difficulty} level, {topic} requires reasoning about {aspect} step by step; the other options describe tooling or misconceptions rather than program behaviour.\n\n"
        ));
    }
    out
}

fn explanation(params: &[(String, String)]) -> String {
    let question = parameter(params, protocol::PARAM_QUESTION).unwrap_or("this question");
    let answer = parameter(params, protocol::PARAM_ANSWER).unwrap_or("the marked option");
    format!(
        "EXPLANATION: The correct answer is \"{answer}\". Work through \"{question}\" one step at a time: identify what the code does, rule out options that contradict it, and the remaining choice follows."
    )
}

fn chat(prompt: &str, rng: &mut ChaCha8Rng) -> String {
    let knowledge = protocol::examples_of(prompt);
    match knowledge.choose(rng) {
        Some(k) => format!(
            "REPLY: {} Take it one small step at a time; you are not alone in this.",
            k.trim()
        ),
        None => format!("REPLY: {SUPPORTIVE_ECHO}"),
    }
}

fn roadmap(params: &[(String, String)]) -> String {
    let weeks = parameter(params, protocol::PARAM_TIMELINE_WEEKS)
        .and_then(|w| w.parse::<usize>().ok())
        .unwrap_or(1)
        .max(1);
    let topics: Vec<String> = parameter(params, protocol::PARAM_TOPICS)
        .and_then(|t| serde_json::from_str(t).ok())
        .unwrap_or_default();
    let language = parameter(params, protocol::PARAM_LANGUAGE).unwrap_or("your language");
    if topics.is_empty() {
        return "No topics were given.".into();
    }
    let groups = weeks.min(topics.len());
    let mut out = String::new();
    for g in 0..groups {
        let start = g * weeks / groups + 1;
        let end = (g + 1) * weeks / groups;
        let group = &topics[g * topics.len() / groups..(g + 1) * topics.len() / groups];
        out.push_str(&format!("MILESTONE: Stage {}: {}\n", g + 1, group.join(" and ")));
        out.push_str(&format!("WEEKS: {start}-{end}\n"));
        out.push_str(&format!("TOPICS: {}\n", group.join(", ")));
        let lessons: Vec<String> = group
            .iter()
            .flat_map(|t| {
                [
                    format!("Core ideas of {t} in {language}"),
                    format!("Build a small {language} exercise using {t}"),
                ]
            })
            .collect();
        out.push_str(&format!("LESSONS: {}\n\n", lessons.join("; ")));
    }
    out
}

const STARTER_TIPS: [&str; 3] = [
    "Start with one short lesson today; a five-minute win still builds momentum.",
    "Set up your editor and run a first program. Getting started is the hardest part.",
    "Keep a small notebook of new words you meet while coding.",
];
const STRUGGLING_TIPS: [&str; 3] = [
    "Slow down and re-read one question you missed; understanding one mistake beats rushing ten.",
    "Take a short walk before your next quiz. A calm mind reads code more clearly.",
    "Break the next topic into tiny pieces and celebrate each one you finish.",
];
const STEADY_TIPS: [&str; 3] = [
    "Try explaining today's topic out loud as if teaching a friend.",
    "Revisit an older topic for ten minutes to keep it fresh.",
    "Write one small program that combines two topics you already know.",
];
const THRIVING_TIPS: [&str; 3] = [
    "You are on a roll. Try a harder quiz to stretch yourself.",
    "Read someone else's code today and note one idea worth borrowing.",
    "Pick a tiny project and ship it this week.",
];

fn tip(params: &[(String, String)], rng: &mut ChaCha8Rng) -> String {
    let pool: &[&str] = match parameter(params, protocol::PARAM_CONDITION) {
        Some("struggling") => &STRUGGLING_TIPS,
        Some("steady") => &STEADY_TIPS,
        Some("thriving") => &THRIVING_TIPS,
        _ => &STARTER_TIPS,
    };
    format!("TIP: {}", pool.choose(rng).copied().unwrap_or(STARTER_TIPS[0]))
}

const CONGRATULATORY_QUOTES: [&str; 3] = [
    "Great work! Your effort is turning into real skill.",
    "Well done. Each correct answer is proof of how far you have come.",
    "Excellent result. Enjoy this moment, you earned it.",
];
const ENCOURAGING_QUOTES: [&str; 3] = [
    "Every expert was once a beginner. Mistakes are how you learn.",
    "Not this time, and that is fine. Breathe, review, and try again.",
    "Progress is not always visible, but it is happening. Keep going.",
];

fn quote(params: &[(String, String)], rng: &mut ChaCha8Rng) -> String {
    let pool: &[&str] = match parameter(params, protocol::PARAM_CATEGORY) {
        Some("congratulatory") => &CONGRATULATORY_QUOTES,
        _ => &ENCOURAGING_QUOTES,
    };
    format!("QUOTE: {}", pool.choose(rng).copied().unwrap_or(ENCOURAGING_QUOTES[0]))
}
