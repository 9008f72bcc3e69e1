mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock};

use chrono::{Duration, NaiveDate};
use codepace_core::learning::{
    validate_milestones, Clock, FixedClock, LearningError, LearningService, QuizMode, RoadmapSource, TipCondition,
    LOG_QUIZ_RESULTS,
};
use codepace_core::provider::testing::{RecordingProvider, ScriptedProvider, SwitchableProvider};
use codepace_core::provider::{MockProvider, TextProvider};
use codepace_core::rag::{QuestionOrigin, QuoteCategory, RagError, RagPipeline};
use codepace_core::storage::{MemoryStore, Storage};
use codepace_core::{Corpus, Difficulty};
use common::fixture_corpus;

struct Harness {
    service: LearningService,
    clock: Arc<FixedClock>,
    store: Arc<MemoryStore>,
}

fn day(d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 5, d).unwrap()
}

fn harness_with(provider: Arc<dyn TextProvider>, corpus: Corpus) -> Harness {
    let clock = Arc::new(FixedClock::at_date(day(10)));
    let store = Arc::new(MemoryStore::new());
    let service = LearningService::new(
        Arc::new(RwLock::new(corpus)),
        RagPipeline::new(provider),
        store.clone(),
        clock.clone(),
        Some(7),
    );
    Harness { service, clock, store }
}

fn harness() -> Harness {
    harness_with(Arc::new(MockProvider::default()), fixture_corpus())
}

fn answers_with(session: &codepace_core::learning::QuizSession, correct: usize) -> BTreeMap<String, usize> {
    session
        .questions
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let choice = if i < correct { q.correct_index } else { (q.correct_index + 1) % 4 };
            (q.id.clone(), choice)
        })
        .collect()
}

#[test]
fn static_quiz_samples_distinct_matching_questions() {
    let h = harness();
    let session = h
        .service
        .start_quiz("ana", "Loops", Difficulty::Beginner, QuizMode::Static, 5)
        .unwrap();
    assert_eq!(session.question_ids.len(), 5);
    let distinct: BTreeSet<_> = session.question_ids.iter().collect();
    assert_eq!(distinct.len(), 5);
    assert!(session
        .questions
        .iter()
        .all(|q| q.topic == "loops" && q.difficulty == Difficulty::Beginner && q.origin == QuestionOrigin::Static));
    assert_eq!(session.started_at, h.clock.now());
}

#[test]
fn static_sampling_is_seeded() {
    let ids = |seed| {
        let service = LearningService::new(
            Arc::new(RwLock::new(fixture_corpus())),
            RagPipeline::new(Arc::new(MockProvider::default())),
            Arc::new(MemoryStore::new()),
            Arc::new(FixedClock::at_date(day(1))),
            Some(seed),
        );
        (0..4)
            .map(|_| {
                service
                    .start_quiz("u", "loops", Difficulty::Beginner, QuizMode::Static, 4)
                    .unwrap()
                    .question_ids
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(ids(11), ids(11));
    assert_ne!(ids(11), ids(12));
}

#[test]
fn too_many_static_questions() {
    let h = harness();
    let err = h
        .service
        .start_quiz("ana", "loops", Difficulty::Advanced, QuizMode::Static, 4)
        .unwrap_err();
    assert!(matches!(
        err,
        LearningError::InsufficientQuestions {
            requested: 4,
            available: 3
        }
    ));
    let err = h
        .service
        .start_quiz("ana", "loops", Difficulty::Beginner, QuizMode::Static, 0)
        .unwrap_err();
    assert!(matches!(err, LearningError::InvalidCount(0)));
}

#[test]
fn dynamic_quiz_with_mock() {
    let h = harness();
    let session = h
        .service
        .start_quiz("ana", "loops", Difficulty::Beginner, QuizMode::Dynamic, 3)
        .unwrap();
    assert_eq!(session.questions.len(), 3);
    assert!(session.questions.iter().all(|q| q.origin == QuestionOrigin::Dynamic));
    assert_eq!(session.difficulty, Difficulty::Intermediate);
    // Generated questions stay retrievable for explanations.
    let (item, text) = h.service.explain(&session.question_ids[0]).unwrap();
    assert_eq!(item, session.questions[0]);
    assert_eq!(text, item.explanation);
}

#[test]
fn dynamic_quiz_without_exemplars() {
    let h = harness_with(Arc::new(MockProvider::default()), Corpus::new());
    let err = h
        .service
        .start_quiz("ana", "loops", Difficulty::Beginner, QuizMode::Dynamic, 3)
        .unwrap_err();
    assert!(matches!(err, LearningError::Rag(RagError::NoExemplars { .. })));
}

#[test]
fn mastery_escalates_dynamic_difficulty() {
    let h = harness();
    let s = h
        .service
        .start_quiz("ana", "loops", Difficulty::Intermediate, QuizMode::Static, 4)
        .unwrap();
    h.service.complete_quiz("ana", &s.session_id, answers_with(&s, 4)).unwrap();
    let d = h
        .service
        .start_quiz("ana", "loops", Difficulty::Beginner, QuizMode::Dynamic, 1)
        .unwrap();
    assert_eq!(d.difficulty, Difficulty::Advanced);
    assert_eq!(d.questions[0].difficulty, Difficulty::Advanced);
}

#[test]
fn completing_quizzes() {
    let h = harness();
    let s = h
        .service
        .start_quiz("ana", "loops", Difficulty::Beginner, QuizMode::Static, 10)
        .unwrap();
    h.clock.advance(Duration::milliseconds(93_250));
    let outcome = h.service.complete_quiz("ana", &s.session_id, answers_with(&s, 7)).unwrap();
    assert_eq!((outcome.correct, outcome.total), (7, 10));
    assert!((outcome.score_fraction - 0.7).abs() < 1e-12);
    assert_eq!(outcome.quote.category, QuoteCategory::Congratulatory);
    assert_eq!(outcome.duration_ms, 93_250);
    let session = &outcome.session;
    assert_eq!(
        (session.completed_at.unwrap() - session.started_at).num_milliseconds(),
        session.duration_ms.unwrap()
    );
    assert_eq!(outcome.points_awarded, 70);
    assert_eq!(outcome.progress.streak_days, 1);
    assert_eq!(outcome.results.iter().filter(|r| r.correct).count(), 7);

    // Running average by hand: (0.7 + 1.0 + 0.0) / 3.
    for correct in [5, 0] {
        let s = h
            .service
            .start_quiz("ana", "loops", Difficulty::Beginner, QuizMode::Static, 5)
            .unwrap();
        let o = h.service.complete_quiz("ana", &s.session_id, answers_with(&s, correct)).unwrap();
        let expected = if correct == 5 { QuoteCategory::Congratulatory } else { QuoteCategory::Encouraging };
        assert_eq!(o.quote.category, expected);
    }
    let progress = h.service.progress("ana").unwrap();
    let avg = progress.average("loops", Difficulty::Beginner).unwrap();
    assert!((avg - 1.7 / 3.0).abs() < 1e-12);
    assert_eq!(progress.points, 170);
    assert_eq!(progress.history.len(), 3);

    let stored = h.service.session("ana", &s.session_id).unwrap();
    assert!(stored.is_completed());
    let log = h.store.as_ref() as &dyn Storage;
    assert_eq!(log.read_log(LOG_QUIZ_RESULTS).unwrap().len(), 3);
}

#[test]
fn completion_errors() {
    let h = harness();
    let s = h
        .service
        .start_quiz("ana", "variables", Difficulty::Beginner, QuizMode::Static, 3)
        .unwrap();
    let mut partial = answers_with(&s, 3);
    let dropped = s.question_ids[1].clone();
    partial.remove(&dropped);
    match h.service.complete_quiz("ana", &s.session_id, partial).unwrap_err() {
        LearningError::IncompleteAnswers { missing } => assert_eq!(missing, vec![dropped]),
        other => panic!("{other:?}"),
    }
    let mut extra = answers_with(&s, 3);
    extra.insert("not-a-question".into(), 0);
    assert!(matches!(
        h.service.complete_quiz("ana", &s.session_id, extra),
        Err(LearningError::InvalidAnswer(_))
    ));
    let mut out_of_range = answers_with(&s, 3);
    out_of_range.insert(s.question_ids[0].clone(), 4);
    assert!(matches!(
        h.service.complete_quiz("ana", &s.session_id, out_of_range),
        Err(LearningError::InvalidAnswer(_))
    ));
    assert!(matches!(
        h.service.complete_quiz("bob", &s.session_id, answers_with(&s, 3)),
        Err(LearningError::SessionNotFound(_))
    ));
    h.service.complete_quiz("ana", &s.session_id, answers_with(&s, 3)).unwrap();
    assert!(matches!(
        h.service.complete_quiz("ana", &s.session_id, answers_with(&s, 3)),
        Err(LearningError::SessionAlreadyCompleted(_))
    ));
    assert_eq!(h.service.progress("ana").unwrap().points, 100);
}

#[test]
fn streaks_follow_calendar_days() {
    let h = harness();
    let take = |h: &Harness| {
        let s = h
            .service
            .start_quiz("ana", "arrays", Difficulty::Beginner, QuizMode::Static, 1)
            .unwrap();
        h.service
            .complete_quiz("ana", &s.session_id, answers_with(&s, 1))
            .unwrap()
            .progress
            .streak_days
    };
    assert_eq!(take(&h), 1);
    h.clock.advance(Duration::hours(3));
    assert_eq!(take(&h), 1);
    h.clock.advance(Duration::days(1));
    assert_eq!(take(&h), 2);
    h.clock.advance(Duration::days(3));
    assert_eq!(take(&h), 1);
}

#[test]
fn concurrent_completions_are_serialized() {
    let h = Arc::new(harness());
    let sessions: Vec<_> = (0..8)
        .map(|_| {
            h.service
                .start_quiz("ana", "loops", Difficulty::Beginner, QuizMode::Static, 2)
                .unwrap()
        })
        .collect();
    std::thread::scope(|scope| {
        for s in &sessions {
            let h = h.clone();
            scope.spawn(move || {
                h.service.complete_quiz("ana", &s.session_id, answers_with(s, 1)).unwrap();
            });
        }
    });
    let progress = h.service.progress("ana").unwrap();
    assert_eq!(progress.history.len(), 8);
    assert_eq!(progress.points, 8 * 50);
}

fn topics(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

#[test]
fn roadmap_with_mock() {
    let h = harness();
    let wanted = topics(&["variables", "loops", "functions", "arrays"]);
    let roadmap = h.service.generate_roadmap("ana", 4, &wanted, "python").unwrap();
    assert_eq!(roadmap.source, RoadmapSource::Generated);
    validate_milestones(&roadmap.milestones, 4, &wanted).unwrap();
    assert_eq!(roadmap.milestones.first().unwrap().start_week, 1);
    assert_eq!(roadmap.milestones.last().unwrap().end_week, 4);
    assert_eq!(h.service.latest_roadmap("ana").unwrap(), Some(roadmap));

    let single = h.service.generate_roadmap("ana", 1, &topics(&["loops"]), "go").unwrap();
    assert_eq!(single.milestones.len(), 1);
    assert_eq!((single.milestones[0].start_week, single.milestones[0].end_week), (1, 1));
}

#[test]
fn roadmap_input_errors() {
    let h = harness();
    assert!(matches!(
        h.service.generate_roadmap("ana", 4, &[], "python"),
        Err(LearningError::EmptyTopics)
    ));
    assert!(matches!(
        h.service.generate_roadmap("ana", 4, &topics(&["  "]), "python"),
        Err(LearningError::EmptyTopics)
    ));
    assert!(matches!(
        h.service.generate_roadmap("ana", 0, &topics(&["loops"]), "python"),
        Err(LearningError::InvalidTimeline(0))
    ));
}

#[test]
fn roadmap_retries_then_falls_back() {
    let scripted = Arc::new(ScriptedProvider::new(MockProvider::default()));
    let h = harness_with(scripted.clone(), fixture_corpus());
    let wanted = topics(&["loops", "arrays", "functions"]);

    scripted.push_reply("MILESTONE: everything\nWEEKS: 1-9\nTOPICS: loops, arrays, functions");
    let retried = h.service.generate_roadmap("ana", 3, &wanted, "rust").unwrap();
    assert_eq!(retried.source, RoadmapSource::Generated);
    assert_eq!(scripted.pending(), 0);

    scripted.push_reply("nonsense");
    scripted.push_reply("MILESTONE: a\nWEEKS: 1-2\nTOPICS: loops\nMILESTONE: b\nWEEKS: 2-3\nTOPICS: arrays, functions");
    let fallback = h.service.generate_roadmap("ana", 3, &wanted, "rust").unwrap();
    assert_eq!(fallback.source, RoadmapSource::Fallback);
    validate_milestones(&fallback.milestones, 3, &wanted).unwrap();
    assert_eq!(fallback.milestones.len(), 3);
}

#[test]
fn roadmap_survives_provider_outage() {
    let switch = Arc::new(SwitchableProvider::new(MockProvider::default()));
    switch.set_generation_down(true);
    let h = harness_with(switch, fixture_corpus());
    let wanted = topics(&["loops", "arrays"]);
    let roadmap = h.service.generate_roadmap("ana", 6, &wanted, "").unwrap();
    assert_eq!(roadmap.source, RoadmapSource::Fallback);
    assert_eq!(roadmap.language, "any language");
    validate_milestones(&roadmap.milestones, 6, &wanted).unwrap();
}

#[test]
fn tips_are_stable_per_day() {
    let h = harness();
    let first = h.service.tip_of_the_day("ana", day(10)).unwrap();
    let second = h.service.tip_of_the_day("ana", day(10)).unwrap();
    assert_eq!(first, second);
    assert_eq!(first.condition, TipCondition::Starter);
    assert!(!first.fallback);
    assert_eq!(h.service.tip_today("ana").unwrap(), first);
}

#[test]
fn struggling_learners_get_the_struggling_condition() {
    let recorder = Arc::new(RecordingProvider::new(MockProvider::default()));
    let h = harness_with(recorder.clone(), fixture_corpus());
    for correct in [0, 1, 0] {
        let s = h
            .service
            .start_quiz("ana", "loops", Difficulty::Beginner, QuizMode::Static, 3)
            .unwrap();
        h.service.complete_quiz("ana", &s.session_id, answers_with(&s, correct)).unwrap();
    }
    recorder.clear();
    let tip = h.service.tip_of_the_day("ana", day(10)).unwrap();
    assert_eq!(tip.condition, TipCondition::Struggling);
    let prompts = recorder.prompts();
    assert_eq!(prompts.len(), 1);
    assert!(prompts[0].contains("condition: struggling"));
}

#[test]
fn tip_snapshots_change_with_progress() {
    let h = harness();
    let before = h.service.tip_of_the_day("ana", day(10)).unwrap();
    let s = h
        .service
        .start_quiz("ana", "loops", Difficulty::Beginner, QuizMode::Static, 2)
        .unwrap();
    h.service.complete_quiz("ana", &s.session_id, answers_with(&s, 2)).unwrap();
    let after = h.service.tip_of_the_day("ana", day(11)).unwrap();
    assert_ne!(before.derived_from, after.derived_from);
    assert_eq!(after.condition, TipCondition::Thriving);
}

#[test]
fn tip_fallback_is_persisted() {
    let switch = Arc::new(SwitchableProvider::new(MockProvider::default()));
    let h = harness_with(switch.clone(), fixture_corpus());
    switch.set_generation_down(true);
    let tip = h.service.tip_of_the_day("ana", day(10)).unwrap();
    assert!(tip.fallback);
    assert!(TipCondition::Starter.fallback_tips().contains(&tip.text.as_str()));
    switch.set_generation_down(false);
    assert_eq!(h.service.tip_of_the_day("ana", day(10)).unwrap(), tip);
}
