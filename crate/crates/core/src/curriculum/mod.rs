//! Curriculum conditions, lesson prompts and lesson generation.

mod condition;
mod lesson;

pub use condition::{
    build_condition, build_condition_with, scrambled_order, ConditionName, CurriculumCondition, StageRounds, StageSpec,
    TARGET_ROUNDS,
};
pub use lesson::{
    accumulate, behavior_patterns, build_lesson_context, generate_lesson, GeneratedLesson, Lesson, LessonGenerator,
    LessonPromptContext, LESSON_SYSTEM_PROMPT, NO_PREVIOUS_LESSONS, STUB_GENERATOR_ID,
};

use thiserror::Error;

use crate::gateway::GatewayError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurriculumError {
    #[error("the scrambled condition needs a scramble seed")]
    MissingSeed,
    #[error("condition `{0}` takes no scramble seed")]
    UnexpectedSeed(ConditionName),
    #[error("unknown condition `{0}`")]
    UnknownCondition(String),
    #[error("invalid stage: {0}")]
    InvalidStage(String),
    #[error("lesson context needs a completed game log")]
    IncompleteLog,
    #[error("lesson context: {0}")]
    Context(String),
    #[error("lesson prompt: {0}")]
    Render(String),
    #[error("lesson generator returned an empty reply for stage {stage}")]
    EmptyLesson { stage: usize },
    #[error(transparent)]
    Gateway(GatewayError),
}
