use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::protocol::{self, example_close, example_open};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Questions,
    Explanation,
    Chat,
    Roadmap,
    Tip,
    Quote,
}

impl PromptKind {
    pub fn directive_header(self) -> &'static str {
        match self {
            PromptKind::Questions => protocol::HEADER_QUESTIONS,
            PromptKind::Explanation => protocol::HEADER_EXPLANATION,
            PromptKind::Chat => protocol::HEADER_CHAT,
            PromptKind::Roadmap => protocol::HEADER_ROADMAP,
            PromptKind::Tip => protocol::HEADER_TIP,
            PromptKind::Quote => protocol::HEADER_QUOTE,
        }
    }

    /// Only tips may be assembled without exemplars.
    pub fn requires_exemplars(self) -> bool {
        self != PromptKind::Tip
    }

    fn role(self) -> &'static str {
        match self {
            PromptKind::Questions => "You write multiple-choice practice questions for novice programmers.",
            PromptKind::Explanation => "You explain quiz answers to novice programmers patiently and clearly.",
            PromptKind::Chat => "You are a calm, supportive assistant for people learning to code. Answer only from the knowledge provided.",
            PromptKind::Roadmap => "You plan week-by-week learning roadmaps for novice programmers.",
            PromptKind::Tip => "You write one short, kind, practical tip of the day for a person learning to code.",
            PromptKind::Quote => "You write one short motivational message for a learner who just finished a quiz.",
        }
    }

    fn steps(self) -> &'static [&'static str] {
        match self {
            PromptKind::Questions => &[
                "Read each example and note its topic, its difficulty and the concept it tests.",
                "Pick a related concept for the requested topic. If the requested difficulty is higher than the examples, make the question require more reasoning steps.",
                "Write the question stem, then work out the correct answer before writing any options.",
                "Write three plausible wrong options based on common misconceptions. All four options must differ.",
                "Explain step by step why the correct option is right and the others are not.",
                "Produce exactly the requested number of questions in the output format.",
            ],
            PromptKind::Explanation => &[
                "Restate what the question asks.",
                "Reason step by step about what the code or concept does.",
                "Show why the correct answer follows and why each other option fails.",
            ],
            PromptKind::Chat => &[
                "Read the learner's message and the recent conversation.",
                "Find the knowledge examples that address the learner's concern.",
                "Reply in two to four sentences using only that knowledge, warmly and without judgement.",
            ],
            PromptKind::Roadmap => &[
                "List the requested topics in the given order.",
                "Group neighbouring topics into milestones so every topic appears in exactly one milestone.",
                "Give each milestone a week range inside the timeline; ranges must not overlap and must be in order.",
                "Add concrete lessons in the requested programming language for each milestone.",
            ],
            PromptKind::Tip => &[
                "Look at the learner's condition and recent activity.",
                "Choose one small, concrete action the learner can take today.",
                "Write it as a single encouraging sentence.",
            ],
            PromptKind::Quote => &[
                "Check the category: congratulatory or encouraging.",
                "Write one or two sentences in that tone, in the style of the examples.",
            ],
        }
    }

    fn output_format(self) -> &'static str {
        match self {
            PromptKind::Questions => "For each question, one block:\n1. Q: <question stem>\nA) <option>\nB) <option>\nC) <option>\nD) <option>\nANSWER: <A|B|C|D>\nEXPLANATION: <step-by-step explanation>",
            PromptKind::Explanation => "EXPLANATION: <explanation>",
            PromptKind::Chat => "REPLY: <reply>",
            PromptKind::Roadmap => "For each milestone, one block:\nMILESTONE: <title>\nWEEKS: <start>-<end>\nTOPICS: <topic>, <topic>\nLESSONS: <lesson>; <lesson>",
            PromptKind::Tip => "TIP: <tip>",
            PromptKind::Quote => "QUOTE: <quote>",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    Learner,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: ChatRole,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptParams {
    pub fields: BTreeMap<String, String>,
    pub history: Vec<ChatTurn>,
    pub message: Option<String>,
}

impl PromptParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub kind: PromptKind,
    pub directive_header: String,
    pub exemplars: Vec<String>,
    pub params: PromptParams,
    pub rendered: String,
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Renders the prompt for `kind`. The output holds the directive header once
/// as its first line, every exemplar verbatim and the step-by-step block.
pub fn assemble_prompt(kind: PromptKind, exemplars: &[String], params: &PromptParams) -> PromptBundle {
    let header = kind.directive_header();
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    out.push_str(kind.role());
    out.push_str("\n\n");

    if !params.fields.is_empty() {
        out.push_str(protocol::SECTION_PARAMETERS);
        out.push('\n');
        for (k, v) in &params.fields {
            out.push_str(&format!("{}: {}\n", single_line(k), single_line(v)));
        }
        out.push('\n');
    }

    if !exemplars.is_empty() {
        out.push_str(protocol::SECTION_EXAMPLES);
        out.push('\n');
        for (i, ex) in exemplars.iter().enumerate() {
            out.push_str(&example_open(i + 1));
            out.push('\n');
            out.push_str(ex);
            out.push('\n');
            out.push_str(&example_close(i + 1));
            out.push('\n');
        }
        out.push('\n');
    }

    if !params.history.is_empty() {
        out.push_str(protocol::SECTION_CONVERSATION);
        out.push('\n');
        for turn in &params.history {
            let who = match turn.role {
                ChatRole::Learner => "learner",
                ChatRole::Assistant => "assistant",
            };
            out.push_str(&format!("{who}: {}\n", single_line(&turn.text)));
        }
        out.push('\n');
    }

    if let Some(message) = &params.message {
        out.push_str(protocol::SECTION_MESSAGE);
        out.push('\n');
        out.push_str(&single_line(message));
        out.push_str("\n\n");
    }

    out.push_str(protocol::SECTION_STEPS);
    out.push('\n');
    for (i, step) in kind.steps().iter().enumerate() {
        out.push_str(&format!("{}. {step}\n", i + 1));
    }
    out.push('\n');
    out.push_str(protocol::SECTION_OUTPUT);
    out.push('\n');
    out.push_str(kind.output_format());
    out.push('\n');

    PromptBundle {
        kind,
        directive_header: header.to_string(),
        exemplars: exemplars.to_vec(),
        params: params.clone(),
        rendered: out,
    }
}
