//! Retrieve-then-generate flows: dynamic questions, explanations, grounded
//! chat replies and post-quiz quotes.

mod grammar;
mod prompt;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use grammar::{parse_question_blocks, GrammarError, ParsedQuestion};
pub use prompt::{assemble_prompt, ChatRole, ChatTurn, PromptBundle, PromptKind, PromptParams};

use crate::ingest::{validate_question_parts, Corpus, QuestionRecord, ATTR_TAG, OPTION_LETTERS};
use crate::protocol;
use crate::provider::{Completion, GenerationRequest, ProviderError, TextProvider};
use crate::types::{normalize_topic, ChunkKind, Difficulty};
use crate::vector::{ChunkId, MetadataFilter, SearchHit, VectorError};

pub const DEFAULT_QUESTION_K: usize = 4;
pub const DEFAULT_CHAT_K: usize = 3;
pub const DEFAULT_GROUNDING_THRESHOLD: f64 = 0.35;
pub const DEFAULT_HISTORY_WINDOW: usize = 6;
/// Scores at or above this are congratulated; it is also the mastery bar.
pub const PASS_THRESHOLD: f64 = 0.7;

pub const STRUCTURED_TEMPERATURE: f64 = 0.0;
pub const CREATIVE_TEMPERATURE: f64 = 0.7;
pub const CHAT_TEMPERATURE: f64 = 0.3;

#[derive(Debug, thiserror::Error)]
pub enum RagError {
    #[error("no question exemplars found for topic '{topic}'")]
    NoExemplars { topic: String },
    #[error("provider output could not be parsed after retry: {0}")]
    GenerationUnparseable(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("message is empty")]
    EmptyMessage,
    #[error("retrieval failed: {0}")]
    Index(#[from] VectorError),
    #[error("invalid question: {0}")]
    InvalidQuestion(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionOrigin {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub id: String,
    pub topic: String,
    pub difficulty: Difficulty,
    pub stem: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    pub explanation: String,
    pub origin: QuestionOrigin,
    /// Exemplar chunks the question was generated from; empty for static.
    #[serde(default)]
    pub provenance: Vec<ChunkId>,
}

impl QuestionItem {
    pub fn validate(&self) -> Result<(), String> {
        validate_question_parts(&self.stem, &self.options, self.correct_index, &self.explanation)
            .or_else(|e| {
                // A dynamic item may legitimately lack a captured explanation.
                let blank_ok = self.origin == QuestionOrigin::Dynamic && self.explanation.trim().is_empty();
                if blank_ok {
                    validate_question_parts(&self.stem, &self.options, self.correct_index, "-")
                } else {
                    Err(e)
                }
            })
    }
}

impl From<&QuestionRecord> for QuestionItem {
    fn from(r: &QuestionRecord) -> Self {
        QuestionItem {
            id: r.id.clone(),
            topic: r.topic.clone(),
            difficulty: r.difficulty,
            stem: r.stem.clone(),
            options: r.options.clone(),
            correct_index: r.correct_index,
            explanation: r.explanation.clone(),
            origin: QuestionOrigin::Static,
            provenance: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicQuestionRequest {
    pub topic: String,
    pub difficulty: Difficulty,
    pub count: usize,
    /// Highest level the learner has mastered on this topic, if any.
    pub mastered: Option<Difficulty>,
}

/// Difficulty for generated questions: one level above the higher of the
/// requested level and the mastered level, capped at `Advanced`.
pub fn escalate(requested: Difficulty, mastered: Option<Difficulty>) -> Difficulty {
    mastered.map_or(requested, |m| m.max(requested)).next()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub text: String,
    pub source_tags: Vec<String>,
    pub grounded: bool,
    pub top_score: Option<f64>,
}

pub const FALLBACK_REPLIES: [&str; 3] = [
    "I'm not sure I have the right answer for that yet, but you are not alone. Try taking a short break and coming back to the problem step by step. If you are feeling overwhelmed, please consider talking to someone you trust or a mental health professional.",
    "That sounds hard, and it is okay to feel that way while learning something new. Could you tell me a little more about what is on your mind? If these feelings are heavy, reaching out to a counsellor or a professional can really help.",
    "Thank you for sharing that with me. I may not have the best guidance for this, so please be gentle with yourself and consider speaking with a friend, a mentor or a mental health professional.",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuoteCategory {
    Congratulatory,
    Encouraging,
}

impl QuoteCategory {
    pub fn for_score(score_fraction: f64) -> QuoteCategory {
        if score_fraction >= PASS_THRESHOLD {
            QuoteCategory::Congratulatory
        } else {
            QuoteCategory::Encouraging
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuoteCategory::Congratulatory => "congratulatory",
            QuoteCategory::Encouraging => "encouraging",
        }
    }

    pub fn builtin(self) -> &'static [&'static str] {
        match self {
            QuoteCategory::Congratulatory => &BUILTIN_CONGRATULATIONS,
            QuoteCategory::Encouraging => &BUILTIN_ENCOURAGEMENTS,
        }
    }
}

const BUILTIN_CONGRATULATIONS: [&str; 3] = [
    "Fantastic job! Your practice is paying off.",
    "You nailed it. Take a moment to be proud of your progress.",
    "Great result! Keep that curiosity going.",
];
const BUILTIN_ENCOURAGEMENTS: [&str; 3] = [
    "Every mistake is a step toward understanding. You've got this.",
    "Learning to code is a marathon, not a sprint. Try again when you're ready.",
    "Struggling means you're learning. Review the explanations and give it another go.",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackQuote {
    pub category: QuoteCategory,
    pub text: String,
    /// True when the text came from the built-in set rather than the provider.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub question_k: usize,
    pub chat_k: usize,
    pub grounding_threshold: f64,
    pub history_window: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            question_k: DEFAULT_QUESTION_K,
            chat_k: DEFAULT_CHAT_K,
            grounding_threshold: DEFAULT_GROUNDING_THRESHOLD,
            history_window: DEFAULT_HISTORY_WINDOW,
        }
    }
}

fn stable_pick<'a>(seed: &[u8], items: &[&'a str]) -> &'a str {
    let hash = crate::provider::stable_hash(seed);
    items[(hash % items.len() as u64) as usize]
}

/// Stateless orchestrator over a provider; corpus and history are passed in.
#[derive(Clone)]
pub struct RagPipeline {
    provider: Arc<dyn TextProvider>,
    config: PipelineConfig,
}

impl std::fmt::Debug for RagPipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RagPipeline")
            .field("provider", &self.provider.name())
            .field("config", &self.config)
            .finish()
    }
}

impl RagPipeline {
    pub fn new(provider: Arc<dyn TextProvider>) -> Self {
        Self::with_config(provider, PipelineConfig::default())
    }

    pub fn with_config(provider: Arc<dyn TextProvider>, config: PipelineConfig) -> Self {
        RagPipeline { provider, config }
    }

    pub fn provider(&self) -> &Arc<dyn TextProvider> {
        &self.provider
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn complete(
        &self,
        bundle: &PromptBundle,
        temperature: f64,
        max_output_length: usize,
    ) -> Result<Completion, ProviderError> {
        let request = GenerationRequest::new(bundle.rendered.clone())
            .temperature(temperature)
            .max_output_length(max_output_length);
        self.provider.complete(&request)
    }

    fn embed_query(&self, text: &str) -> Result<crate::vector::Embedding, RagError> {
        let mut vectors = self.provider.embed(&[text.to_string()])?;
        vectors
            .pop()
            .ok_or_else(|| RagError::Provider(ProviderError::Unavailable("embedder returned nothing".into())))
    }

    /// Up to `question_k` question chunks for the topic, preferring the
    /// target difficulty and topping up from other levels of the same topic.
    pub fn retrieve_exemplars(
        &self,
        corpus: &Corpus,
        topic: &str,
        difficulty: Difficulty,
    ) -> Result<Vec<SearchHit>, RagError> {
        let k = self.config.question_k.max(1);
        let query = self.embed_query(&format!("{topic} {difficulty} quiz question"))?;
        let base = MetadataFilter::any().topic(topic).kind(ChunkKind::Question);
        let mut hits = corpus.index.knn_search(&query, k, &base.clone().difficulty(difficulty))?;
        if hits.len() < k {
            let relaxed = corpus.index.knn_search(&query, k + hits.len(), &base)?;
            for hit in relaxed {
                if hits.len() == k {
                    break;
                }
                if !hits.iter().any(|h| h.chunk_id == hit.chunk_id) {
                    hits.push(hit);
                }
            }
        }
        for (i, hit) in hits.iter_mut().enumerate() {
            hit.rank = i + 1;
        }
        Ok(hits)
    }

    pub fn generate_dynamic_questions(
        &self,
        corpus: &Corpus,
        request: &DynamicQuestionRequest,
    ) -> Result<Vec<QuestionItem>, RagError> {
        if request.count == 0 {
            return Ok(Vec::new());
        }
        let topic = normalize_topic(&request.topic);
        let target = escalate(request.difficulty, request.mastered);
        let hits = self.retrieve_exemplars(corpus, &topic, target)?;
        if hits.is_empty() {
            return Err(RagError::NoExemplars { topic });
        }
        let provenance: Vec<ChunkId> = hits.iter().map(|h| h.chunk_id).collect();
        let exemplars: Vec<String> = hits
            .iter()
            .filter_map(|h| corpus.index.get(h.chunk_id).map(|c| c.text.clone()))
            .collect();

        let params = PromptParams::new()
            .field(protocol::PARAM_TOPIC, &topic)
            .field(protocol::PARAM_DIFFICULTY, target)
            .field(protocol::PARAM_COUNT, request.count);
        let budget = 160 * request.count + 64;

        let mut last_error = String::new();
        for attempt in 1..=2 {
            let params = if attempt == 1 {
                params.clone()
            } else {
                params.clone().field("attempt", attempt)
            };
            let bundle = assemble_prompt(PromptKind::Questions, &exemplars, &params);
            let completion = self.complete(&bundle, STRUCTURED_TEMPERATURE, budget)?;
            match parse_question_blocks(&completion.text) {
                Ok(parsed) if parsed.len() >= request.count => {
                    return Ok(parsed
                        .into_iter()
                        .take(request.count)
                        .map(|p| QuestionItem {
                            id: format!("dyn-{}", uuid::Uuid::new_v4().simple()),
                            topic: topic.clone(),
                            difficulty: target,
                            stem: p.stem,
                            options: p.options,
                            correct_index: p.correct_index,
                            explanation: p.explanation,
                            origin: QuestionOrigin::Dynamic,
                            provenance: provenance.clone(),
                        })
                        .collect());
                }
                Ok(parsed) => {
                    last_error = format!("expected {} questions, parsed {}", request.count, parsed.len())
                }
                Err(e) => last_error = e.to_string(),
            }
            log::warn!("question generation attempt {attempt} unparseable: {last_error}");
        }
        Err(RagError::GenerationUnparseable(last_error))
    }

    /// Stored explanation for static items, the captured one for dynamic
    /// items, regenerating only when a dynamic item has none.
    pub fn explain_question(&self, item: &QuestionItem) -> Result<String, RagError> {
        item.validate().map_err(RagError::InvalidQuestion)?;
        if !item.explanation.trim().is_empty() {
            return Ok(item.explanation.clone());
        }
        if item.origin == QuestionOrigin::Static {
            return Err(RagError::InvalidQuestion("static question without explanation".into()));
        }
        let options: Vec<String> = OPTION_LETTERS
            .iter()
            .zip(&item.options)
            .map(|(l, o)| format!("{l}) {o}"))
            .collect();
        let exemplar = format!("{} | {} | {} | {}", item.topic, item.difficulty, item.stem, options.join("; "));
        let params = PromptParams::new()
            .field(protocol::PARAM_TOPIC, &item.topic)
            .field(protocol::PARAM_DIFFICULTY, item.difficulty)
            .field(protocol::PARAM_QUESTION, &item.stem)
            .field(protocol::PARAM_ANSWER, &item.options[item.correct_index]);
        let bundle = assemble_prompt(PromptKind::Explanation, &[exemplar], &params);
        let completion = self.complete(&bundle, STRUCTURED_TEMPERATURE, 256)?;
        let text = protocol::strip_label(&completion.text, "EXPLANATION").to_string();
        if text.is_empty() {
            return Err(RagError::GenerationUnparseable("empty explanation".into()));
        }
        Ok(text)
    }

    pub fn chat_reply(&self, corpus: &Corpus, message: &str, history: &[ChatTurn]) -> Result<ChatReply, RagError> {
        let message = message.trim();
        if message.is_empty() {
            return Err(RagError::EmptyMessage);
        }
        let query = self.embed_query(message)?;
        let hits = corpus.index.knn_search(
            &query,
            self.config.chat_k.max(1),
            &MetadataFilter::any().kind(ChunkKind::Conversation),
        )?;
        let top_score = hits.first().map(|h| h.score);
        let threshold = self.config.grounding_threshold;
        if top_score.is_none_or(|s| s < threshold) {
            return Ok(ChatReply {
                text: stable_pick(message.as_bytes(), &FALLBACK_REPLIES).to_string(),
                source_tags: Vec::new(),
                grounded: false,
                top_score,
            });
        }

        let mut source_tags: Vec<String> = Vec::new();
        for hit in hits.iter().filter(|h| h.score >= threshold) {
            let tag = corpus
                .index
                .get(hit.chunk_id)
                .and_then(|c| c.metadata.attribute(ATTR_TAG).map(str::to_string));
            if let Some(tag) = tag {
                if !source_tags.contains(&tag) {
                    source_tags.push(tag);
                }
            }
        }
        let knowledge: Vec<String> = source_tags
            .iter()
            .filter_map(|t| corpus.knowledge.intent(t))
            .flat_map(|i| i.responses.iter().filter(|r| !r.trim().is_empty()).cloned())
            .collect();

        let window = self.config.history_window;
        let start = history.len().saturating_sub(window);
        let mut params = PromptParams::new();
        params.history = history[start..].to_vec();
        params.message = Some(message.to_string());
        let bundle = assemble_prompt(PromptKind::Chat, &knowledge, &params);
        let completion = self.complete(&bundle, CHAT_TEMPERATURE, 200)?;
        let text = protocol::strip_label(&completion.text, "REPLY").to_string();
        let text = if text.is_empty() {
            knowledge.first().cloned().unwrap_or_else(|| FALLBACK_REPLIES[0].to_string())
        } else {
            text
        };
        Ok(ChatReply {
            text,
            source_tags,
            grounded: true,
            top_score,
        })
    }

    /// Never fails: provider errors fall back to a built-in quote of the
    /// same category. Out-of-range scores are clamped into `[0, 1]`.
    pub fn quiz_feedback_quote(&self, score_fraction: f64) -> FeedbackQuote {
        let score = if score_fraction.is_nan() { 0.0 } else { score_fraction.clamp(0.0, 1.0) };
        let category = QuoteCategory::for_score(score);
        let examples: Vec<String> = category.builtin().iter().map(|s| s.to_string()).collect();
        let params = PromptParams::new()
            .field(protocol::PARAM_CATEGORY, category.as_str())
            .field("score_percent", (score * 100.0).round() as i64);
        let bundle = assemble_prompt(PromptKind::Quote, &examples, &params);
        match self.complete(&bundle, CREATIVE_TEMPERATURE, 80) {
            Ok(c) if !protocol::strip_label(&c.text, "QUOTE").is_empty() => FeedbackQuote {
                category,
                text: protocol::strip_label(&c.text, "QUOTE").to_string(),
                fallback: false,
            },
            Ok(_) | Err(_) => FeedbackQuote {
                category,
                text: stable_pick(&score.to_bits().to_le_bytes(), category.builtin()).to_string(),
                fallback: true,
            },
        }
    }
}
