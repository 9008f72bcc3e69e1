//! Parser for the numbered question-block output format.

use crate::ingest::{validate_question_parts, OPTION_COUNT};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedQuestion {
    pub stem: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("question block {block}: {message}")]
pub struct GrammarError {
    /// 1-based.
    pub block: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Stem,
    Option(usize),
    Answer,
    Explanation,
}

#[derive(Default)]
struct Block {
    stem: String,
    options: Vec<(usize, String)>,
    answer: Option<String>,
    explanation: String,
}

fn strip_numbering(line: &str) -> &str {
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return line;
    }
    match line[digits..].chars().next() {
        Some('.') | Some(')') => line[digits + 1..].trim_start(),
        _ => line,
    }
}

fn strip_marker<'a>(line: &'a str, marker: &str) -> Option<&'a str> {
    let head = line.get(..marker.len())?;
    head.eq_ignore_ascii_case(marker).then(|| line[marker.len()..].trim())
}

/// `A)`, `A.` or `A:` (any case), returning the option index and the text.
fn option_marker(line: &str) -> Option<(usize, &str)> {
    let mut chars = line.chars();
    let letter = chars.next()?.to_ascii_uppercase();
    let sep = chars.next()?;
    if !('A'..='D').contains(&letter) || !matches!(sep, ')' | '.' | ':') {
        return None;
    }
    Some(((letter as u8 - b'A') as usize, line[2..].trim()))
}

fn answer_index(raw: &str) -> Option<usize> {
    let cleaned = raw.trim().trim_start_matches(|c: char| c == '(' || c.is_whitespace());
    let cleaned = strip_marker(cleaned, "option").unwrap_or(cleaned);
    let mut chars = cleaned.chars();
    let letter = chars.next()?.to_ascii_uppercase();
    let boundary = chars.next().is_none_or(|c| !c.is_alphanumeric());
    (('A'..='D').contains(&letter) && boundary).then(|| (letter as u8 - b'A') as usize)
}

fn append(target: &mut String, text: &str) {
    if text.is_empty() {
        return;
    }
    if !target.is_empty() {
        target.push(' ');
    }
    target.push_str(text);
}

/// Parses every question block in `text`. Text before the first `Q:` is
/// ignored; any malformed block fails the whole parse.
pub fn parse_question_blocks(text: &str) -> Result<Vec<ParsedQuestion>, GrammarError> {
    let mut blocks: Vec<Block> = Vec::new();
    let mut field: Option<Field> = None;

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let unnumbered = strip_numbering(line);
        if let Some(stem) = strip_marker(unnumbered, "Q:") {
            blocks.push(Block {
                stem: stem.to_string(),
                ..Block::default()
            });
            field = Some(Field::Stem);
            continue;
        }
        let Some(block) = blocks.last_mut() else { continue };
        if let Some(rest) = strip_marker(line, "ANSWER:") {
            block.answer = Some(rest.to_string());
            field = Some(Field::Answer);
        } else if let Some(rest) = strip_marker(line, "EXPLANATION:") {
            append(&mut block.explanation, rest);
            field = Some(Field::Explanation);
        } else if let (Some(Field::Stem | Field::Option(_)), Some((idx, rest))) = (field, option_marker(line)) {
            block.options.push((idx, rest.to_string()));
            field = Some(Field::Option(idx));
        } else {
            match field {
                Some(Field::Stem) => append(&mut block.stem, line),
                Some(Field::Option(_)) => {
                    if let Some((_, last)) = block.options.last_mut() {
                        append(last, line);
                    }
                }
                Some(Field::Explanation) => append(&mut block.explanation, line),
                Some(Field::Answer) | None => {}
            }
        }
    }

    blocks
        .into_iter()
        .enumerate()
        .map(|(i, b)| finish(b).map_err(|message| GrammarError { block: i + 1, message }))
        .collect()
}

fn finish(block: Block) -> Result<ParsedQuestion, String> {
    let mut options = vec![None; OPTION_COUNT];
    for (idx, text) in block.options {
        if options[idx].is_some() {
            return Err(format!("option {} given twice", (b'A' + idx as u8) as char));
        }
        options[idx] = Some(text);
    }
    let options: Vec<String> = options
        .into_iter()
        .enumerate()
        .map(|(i, o)| o.ok_or_else(|| format!("missing option {}", (b'A' + i as u8) as char)))
        .collect::<Result<_, _>>()?;
    let answer = block.answer.ok_or("missing ANSWER line")?;
    let correct_index = answer_index(&answer).ok_or_else(|| format!("unreadable answer '{answer}'"))?;
    validate_question_parts(&block.stem, &options, correct_index, &block.explanation)?;
    Ok(ParsedQuestion {
        stem: block.stem,
        options,
        correct_index,
        explanation: block.explanation,
    })
}
