//! Transcript distances and the attack success predicate: Levenshtein edit
//! distance, character error rate, and goal checks over hard-label
//! transcripts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::Transcript;

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("empty reference string")]
    EmptyReference,
}

/// Unit-cost Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    // Stack fast path when the second string is short. The attack loss runs
    // this once per oracle query on transcripts a few characters long, so
    // the common case should not touch the heap.
    const STACK: usize = 24;
    let mut bbuf = ['\0'; STACK];
    let mut bn = 0;
    let mut fits = true;
    for c in b.chars() {
        if bn == STACK {
            fits = false;
            break;
        }
        bbuf[bn] = c;
        bn += 1;
    }
    if fits {
        let mut row = [0usize; STACK + 1];
        for (j, slot) in row.iter_mut().enumerate().take(bn + 1) {
            *slot = j;
        }
        for (i, ca) in a.chars().enumerate() {
            let mut diag = row[0];
            row[0] = i + 1;
            for j in 0..bn {
                let cost = if ca == bbuf[j] { diag } else { diag + 1 };
                diag = row[j + 1];
                row[j + 1] = cost.min(row[j] + 1).min(diag + 1);
            }
        }
        return row[bn];
    }

    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    // Single-row dynamic program.
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = if ca == cb { diag } else { diag + 1 };
            diag = row[j + 1];
            row[j + 1] = cost.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

/// Character error rate of a transcript against a reference: edit distance
/// normalized by reference length. A rejected transcript scores 1.0.
pub fn cer(transcript: &Transcript, reference: &str) -> Result<f64, DistanceError> {
    if reference.is_empty() {
        return Err(DistanceError::EmptyReference);
    }
    match transcript {
        Transcript::Rejected => Ok(1.0),
        Transcript::Text(hyp) => {
            let reference = crate::oracle::normalize_text(reference);
            if reference.is_empty() {
                return Err(DistanceError::EmptyReference);
            }
            Ok(levenshtein(hyp, &reference) as f64 / reference.chars().count() as f64)
        }
    }
}

/// What counts as a successful attack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackGoal {
    /// Transcript of the unperturbed carrier.
    pub original: String,
    /// Target transcript; `None` makes the goal untargeted.
    pub target: Option<String>,
}

impl AttackGoal {
    pub fn untargeted(original: impl Into<String>) -> AttackGoal {
        AttackGoal {
            original: crate::oracle::normalize_text(&original.into()),
            target: None,
        }
    }

    pub fn targeted(original: impl Into<String>, target: impl Into<String>) -> AttackGoal {
        AttackGoal {
            original: crate::oracle::normalize_text(&original.into()),
            target: Some(crate::oracle::normalize_text(&target.into())),
        }
    }

    pub fn is_targeted(&self) -> bool {
        self.target.is_some()
    }
}

/// Whether `transcript` satisfies the goal. Targeted goals require an exact
/// normalized match. Untargeted goals require a non-rejected transcript that
/// differs from the original; a rejection only counts as success when
/// `count_rejection_as_success` is set.
pub fn attack_goal_holds(
    transcript: &Transcript,
    goal: &AttackGoal,
    count_rejection_as_success: bool,
) -> bool {
    match (&goal.target, transcript) {
        (Some(target), Transcript::Text(w)) => w == target,
        (Some(_), Transcript::Rejected) => false,
        (None, Transcript::Text(w)) => w != &goal.original,
        (None, Transcript::Rejected) => count_rejection_as_success,
    }
}

/// Loss of a transcript against a goal, as averaged by the weak-sync
/// estimator. Targeted goals use CER against the target; untargeted goals
/// use a 0/1 indicator of goal failure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss {
    pub value: f64,
    /// CER term, present for targeted goals.
    pub cer: Option<f64>,
    pub rejected: bool,
}

impl Loss {
    pub fn of(
        transcript: &Transcript,
        goal: &AttackGoal,
        count_rejection_as_success: bool,
    ) -> Loss {
        let rejected = matches!(transcript, Transcript::Rejected);
        match &goal.target {
            Some(target) => {
                let c = cer(transcript, target).unwrap_or(1.0);
                Loss { value: c, cer: Some(c), rejected }
            }
            None => {
                let holds = attack_goal_holds(transcript, goal, count_rejection_as_success);
                Loss { value: if holds { 0.0 } else { 1.0 }, cer: None, rejected }
            }
        }
    }
}
