//! Instruction decomposition, action desirability and behavior rules.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{self, BackendError, LanguageModel, SchemaId, Validated};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstructionError {
    #[error("language backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("length mismatch: {actions} actions, {targets} targets, {scores} scores")]
    LengthMismatch {
        actions: usize,
        targets: usize,
        scores: usize,
    },
    #[error("cannot read prompt template {path}: {reason}")]
    Template { path: String, reason: String },
}

impl From<BackendError> for InstructionError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Malformed(m) => InstructionError::MalformedResponse(m.0),
            other => InstructionError::BackendUnavailable(other.to_string()),
        }
    }
}

/// Lowercases, collapses whitespace and strips trailing punctuation.
pub fn normalize_text(s: &str) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed
        .trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .trim()
        .to_string()
}

/// The four structured sets an instruction decomposes into.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InstructionBundle {
    pub nav_actions: Vec<String>,
    pub nav_landmarks: Vec<String>,
    pub behav_actions: Vec<String>,
    pub behav_targets: Vec<String>,
}

impl InstructionBundle {
    /// Builds a bundle from raw lists, normalizing every entry and
    /// enforcing the action/target alignment.
    pub fn from_raw(
        nav_actions: &[String],
        nav_landmarks: &[String],
        behav_actions: &[String],
        behav_targets: &[String],
    ) -> Result<Self, InstructionError> {
        if behav_actions.len() != behav_targets.len() {
            return Err(InstructionError::MalformedResponse(format!(
                "behav_actions has {} entries but behav_targets has {}",
                behav_actions.len(),
                behav_targets.len()
            )));
        }
        let norm = |key: &str, list: &[String]| -> Result<Vec<String>, InstructionError> {
            list.iter()
                .enumerate()
                .map(|(i, s)| {
                    let n = normalize_text(s);
                    if n.is_empty() {
                        Err(InstructionError::MalformedResponse(format!("{key}[{i}] is empty")))
                    } else {
                        Ok(n)
                    }
                })
                .collect()
        };
        Ok(Self {
            nav_actions: norm("nav_actions", nav_actions)?,
            nav_landmarks: norm("nav_landmarks", nav_landmarks)?,
            behav_actions: norm("behav_actions", behav_actions)?,
            behav_targets: norm("behav_targets", behav_targets)?,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.nav_actions.is_empty()
            && self.nav_landmarks.is_empty()
            && self.behav_actions.is_empty()
            && self.behav_targets.is_empty()
    }
}

/// Probability that each behavioral action is desirable, index-aligned
/// with the bundle's `behav_actions`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DesirabilityVector {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorRule {
    pub action: String,
    pub target: String,
    pub desirability: f64,
    pub undesirability: f64,
}

impl BehaviorRule {
    pub fn new(action: impl Into<String>, target: impl Into<String>, desirability: f64) -> Self {
        let desirability = desirability.clamp(0.0, 1.0);
        Self {
            action: action.into(),
            target: target.into(),
            desirability,
            undesirability: 1.0 - desirability,
        }
    }
}

const DEFAULT_DECOMPOSE: &str = include_str!("../prompts/decompose.txt");
const DEFAULT_ACTION: &str = include_str!("../prompts/action.txt");
const DEFAULT_FRONTIER: &str = include_str!("../prompts/frontier.txt");

/// Prompt templates. `{instruction}`, `{actions}` and `{landmark}` are
/// substituted at query time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSet {
    pub decompose_prompt: String,
    pub action_prompt: String,
    pub frontier_prompt: String,
    pub instruction: String,
}

impl PromptSet {
    pub fn with_instruction(instruction: impl Into<String>) -> Self {
        Self {
            decompose_prompt: DEFAULT_DECOMPOSE.to_string(),
            action_prompt: DEFAULT_ACTION.to_string(),
            frontier_prompt: DEFAULT_FRONTIER.to_string(),
            instruction: instruction.into(),
        }
    }

    /// Replaces any template given by path.
    pub fn load_overrides(
        mut self,
        decompose: Option<&Path>,
        action: Option<&Path>,
        frontier: Option<&Path>,
    ) -> Result<Self, InstructionError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| InstructionError::Template {
                path: p.display().to_string(),
                reason: e.to_string(),
            })
        };
        if let Some(p) = decompose {
            self.decompose_prompt = read(p)?;
        }
        if let Some(p) = action {
            self.action_prompt = read(p)?;
        }
        if let Some(p) = frontier {
            self.frontier_prompt = read(p)?;
        }
        for (name, t) in [
            ("decompose", &self.decompose_prompt),
            ("action", &self.action_prompt),
            ("frontier", &self.frontier_prompt),
        ] {
            if t.trim().is_empty() {
                return Err(InstructionError::Template {
                    path: name.to_string(),
                    reason: "template is empty".to_string(),
                });
            }
        }
        Ok(self)
    }

    pub fn render_decompose(&self) -> String {
        self.decompose_prompt.replace("{instruction}", self.instruction.trim())
    }

    pub fn render_action(&self, actions: &[String]) -> String {
        let list = actions
            .iter()
            .map(|a| format!("\"{a}\""))
            .collect::<Vec<_>>()
            .join(", ");
        self.action_prompt.replace("{actions}", &list)
    }

    pub fn render_frontier(&self, landmark: &str) -> String {
        self.frontier_prompt.replace("{landmark}", landmark)
    }
}

/// Decomposes an instruction through a language backend. Called once per
/// mission.
pub fn decompose(
    instr: &str,
    prompts: &PromptSet,
    backend: &dyn LanguageModel,
) -> Result<InstructionBundle, InstructionError> {
    if normalize_text(instr).is_empty() {
        return Ok(InstructionBundle::default());
    }
    let prompts = PromptSet {
        instruction: instr.to_string(),
        ..prompts.clone()
    };
    let body = backend.complete(SchemaId::Decompose, &prompts.render_decompose())?;
    match gateway::validate(&body, SchemaId::Decompose).map_err(BackendError::Malformed)? {
        Validated::Decompose(b) => Ok(b),
        _ => unreachable!("decompose schema yields a bundle"),
    }
}

/// Verb lexicon and target canonicalization for the offline decomposer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lexicon {
    pub nav_verbs: Vec<String>,
    pub behav_verbs: Vec<String>,
    /// Behavioral verbs whose target may be introduced by a preposition or
    /// by a nested "to <verb> <target>" clause.
    pub caution_verbs: Vec<String>,
    /// Leading phrases dropped from navigation landmarks.
    pub landmark_fillers: Vec<String>,
    /// Exact-match renames applied to behavioral targets.
    pub target_aliases: Vec<(String, String)>,
}

impl Default for Lexicon {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        Self {
            nav_verbs: s(&[
                "go forward until",
                "move forward until",
                "go to",
                "navigate to",
                "walk to",
            ]),
            behav_verbs: s(&[
                "stay on",
                "follow",
                "stop for",
                "stay away from",
                "avoid",
                "yield to",
                "use caution",
                "watch your step",
            ]),
            caution_verbs: s(&["use caution", "watch your step"]),
            landmark_fillers: s(&["you see", "you reach", "you find", "you get to", "the"]),
            target_aliases: vec![
                ("stop signs".into(), "stop sign".into()),
                ("stop hand gestures".into(), "stop hand gesture".into()),
            ],
        }
    }
}

/// Result of the offline decomposer: the bundle plus every clause that
/// matched no lexicon verb.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FallbackDecomposition {
    pub bundle: InstructionBundle,
    pub unclassified: Vec<UnclassifiableClause>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no lexicon verb matches clause {0:?}")]
pub struct UnclassifiableClause(pub String);

fn strip_word_prefix<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let rest = s.strip_prefix(prefix)?;
    if rest.is_empty() {
        Some(rest)
    } else {
        rest.strip_prefix(' ')
    }
}

fn strip_leading<'a>(mut s: &'a str, words: &[&str]) -> &'a str {
    loop {
        let before = s;
        for w in words {
            if let Some(rest) = strip_word_prefix(s, w) {
                s = rest.trim_start();
            }
        }
        if s == before {
            return s;
        }
    }
}

impl Lexicon {
    fn all_verbs(&self) -> impl Iterator<Item = (&str, bool)> {
        self.nav_verbs
            .iter()
            .map(|v| (v.as_str(), true))
            .chain(self.behav_verbs.iter().map(|v| (v.as_str(), false)))
    }

    /// Longest verb that prefixes `clause` at a word boundary.
    fn match_verb<'a>(&self, clause: &'a str) -> Option<(String, bool, &'a str)> {
        self.all_verbs()
            .filter_map(|(v, nav)| strip_word_prefix(clause, v).map(|rest| (v, nav, rest)))
            .max_by_key(|(v, _, _)| v.len())
            .map(|(v, nav, rest)| (v.to_string(), nav, rest.trim()))
    }

    fn starts_with_verb(&self, s: &str) -> bool {
        self.match_verb(s.trim()).is_some()
    }

    fn canonical_target(&self, raw: &str) -> String {
        let t = normalize_text(strip_leading(raw, &["the", "a", "an"]));
        self.target_aliases
            .iter()
            .find(|(from, _)| *from == t)
            .map(|(_, to)| to.clone())
            .unwrap_or(t)
    }

    /// Splits normalized text into clauses on commas, semicolons, periods
    /// and on "and" when a lexicon verb follows it.
    fn clauses(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for piece in text.split([',', ';', '.']) {
            let piece = strip_leading(piece.trim(), &["and", "then", "please"]);
            if piece.is_empty() {
                continue;
            }
            let mut rest = piece;
            loop {
                let mut split_at = None;
                let mut search = 0;
                while let Some(idx) = rest[search..].find(" and ") {
                    let at = search + idx;
                    if self.starts_with_verb(&rest[at + 5..]) {
                        split_at = Some(at);
                        break;
                    }
                    search = at + 5;
                }
                match split_at {
                    Some(at) => {
                        out.push(rest[..at].trim().to_string());
                        rest = rest[at + 5..].trim();
                    }
                    None => {
                        out.push(rest.trim().to_string());
                        break;
                    }
                }
            }
        }
        out
    }

    fn classify(&self, clause: &str, acc: &mut FallbackDecomposition) {
        let Some((verb, is_nav, rest)) = self.match_verb(clause) else {
            log::warn!("unclassifiable instruction clause: {clause:?}");
            acc.unclassified.push(UnclassifiableClause(clause.to_string()));
            return;
        };
        if is_nav {
            let landmark = normalize_text(strip_leading(rest, &self.landmark_fillers.iter().map(|s| s.as_str()).collect::<Vec<_>>()));
            if landmark.is_empty() {
                acc.unclassified.push(UnclassifiableClause(clause.to_string()));
                return;
            }
            acc.bundle.nav_actions.push(verb);
            acc.bundle.nav_landmarks.push(landmark);
            return;
        }
        if self.caution_verbs.contains(&verb) {
            let inner = strip_leading(rest, &["to", "and", "while"]);
            if let Some((_, false, _)) = self.match_verb(inner) {
                let before = acc.bundle.behav_targets.len();
                self.classify(inner, acc);
                if let Some(t) = acc.bundle.behav_targets.get(before).cloned() {
                    acc.bundle.behav_actions.insert(before, verb);
                    acc.bundle.behav_targets.insert(before, t);
                }
                return;
            }
            let target = self.canonical_target(strip_leading(
                rest,
                &["on", "near", "around", "at", "along", "over", "for", "with"],
            ));
            if target.is_empty() {
                acc.unclassified.push(UnclassifiableClause(clause.to_string()));
                return;
            }
            acc.bundle.behav_actions.push(verb);
            acc.bundle.behav_targets.push(target);
            return;
        }
        let target = self.canonical_target(rest);
        if target.is_empty() {
            acc.unclassified.push(UnclassifiableClause(clause.to_string()));
            return;
        }
        acc.bundle.behav_actions.push(verb);
        acc.bundle.behav_targets.push(target);
    }

    /// Deterministic offline decomposition by clause splitting and verb
    /// lookup.
    pub fn decompose(&self, instr: &str) -> FallbackDecomposition {
        let text = normalize_text(instr);
        let mut acc = FallbackDecomposition::default();
        for clause in self.clauses(&text) {
            self.classify(&clause, &mut acc);
        }
        acc
    }
}

/// [`Lexicon::decompose`] with the default lexicon.
pub fn decompose_fallback(instr: &str) -> FallbackDecomposition {
    Lexicon::default().decompose(instr)
}

/// Scores action desirability through a language backend. Values that
/// overshoot [0, 1] by at most 0.01 are clamped.
pub fn score_desirability(
    actions: &[String],
    prompts: &PromptSet,
    backend: &dyn LanguageModel,
) -> Result<DesirabilityVector, InstructionError> {
    if actions.is_empty() {
        return Ok(DesirabilityVector::default());
    }
    let body = backend.complete(SchemaId::Desirability, &prompts.render_action(actions))?;
    let values = match gateway::validate(&body, SchemaId::Desirability)
        .map_err(BackendError::Malformed)?
    {
        Validated::Desirability(v) => v,
        _ => unreachable!("desirability schema yields values"),
    };
    if values.len() != actions.len() {
        return Err(InstructionError::MalformedResponse(format!(
            "expected {} values, got {}",
            actions.len(),
            values.len()
        )));
    }
    Ok(DesirabilityVector {
        values: values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    })
}

/// Desirability lookup used when no language backend is available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesirabilityTable {
    pub entries: Vec<(String, f64)>,
    pub unknown: f64,
}

impl Default for DesirabilityTable {
    fn default() -> Self {
        let entries = [
            ("stay on", 0.9),
            ("follow", 0.9),
            ("use caution", 0.5),
            ("watch your step", 0.5),
            ("yield to", 0.2),
            ("stay away from", 0.1),
            ("avoid", 0.1),
            ("stop for", 0.0),
        ];
        Self {
            entries: entries.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            unknown: 0.5,
        }
    }
}

impl DesirabilityTable {
    /// Exact match first, then the longest table verb contained in the
    /// action.
    pub fn lookup(&self, action: &str) -> f64 {
        let a = normalize_text(action);
        if let Some((_, v)) = self.entries.iter().find(|(k, _)| *k == a) {
            return *v;
        }
        match self
            .entries
            .iter()
            .filter(|(k, _)| a.contains(k.as_str()))
            .max_by_key(|(k, _)| k.len())
        {
            Some((_, v)) => *v,
            None => {
                log::warn!("unknown behavioral action {a:?}; using {}", self.unknown);
                self.unknown
            }
        }
    }

    pub fn score(&self, actions: &[String]) -> DesirabilityVector {
        DesirabilityVector {
            values: actions.iter().map(|a| self.lookup(a)).collect(),
        }
    }
}

/// [`DesirabilityTable::score`] with the shipped default table.
pub fn score_desirability_fallback(actions: &[String]) -> DesirabilityVector {
    DesirabilityTable::default().score(actions)
}

/// Pairs each behavioral action with its target and score, in order.
pub fn pair_rules(
    bundle: &InstructionBundle,
    scores: &DesirabilityVector,
) -> Result<Vec<BehaviorRule>, InstructionError> {
    let (a, t, s) = (
        bundle.behav_actions.len(),
        bundle.behav_targets.len(),
        scores.values.len(),
    );
    if a != t || a != s {
        return Err(InstructionError::LengthMismatch {
            actions: a,
            targets: t,
            scores: s,
        });
    }
    Ok(bundle
        .behav_actions
        .iter()
        .zip(&bundle.behav_targets)
        .zip(&scores.values)
        .map(|((a, t), p)| BehaviorRule::new(a.clone(), t.clone(), *p))
        .collect())
}

/// True when any action asks for cautious stepping.
pub fn gait_caution_flag(behav_actions: &[String]) -> bool {
    behav_actions.iter().any(|a| {
        let a = normalize_text(a);
        a.contains("use caution") || (a.contains("watch") && a.contains("step"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::BackendError;
    use proptest::prelude::*;
    use serde_json::{json, Value};

    const SAMPLE_INSTR: &str = "Go forward until you see a building with blue glasses, stay on the pavements, stop for stop signs, and stay away from the grass";

    fn v(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn expected_bundle() -> InstructionBundle {
        InstructionBundle {
            nav_actions: v(&["go forward until"]),
            nav_landmarks: v(&["a building with blue glasses"]),
            behav_actions: v(&["stay on", "stop for", "stay away from"]),
            behav_targets: v(&["pavements", "stop sign", "grass"]),
        }
    }

    struct Canned(Result<Value, BackendError>);

    impl LanguageModel for Canned {
        fn complete(&self, _: SchemaId, _: &str) -> Result<Value, BackendError> {
            self.0.clone()
        }
    }

    #[test]
    fn fallback_reproduces_worked_example() {
        let d = decompose_fallback(SAMPLE_INSTR);
        assert!(d.unclassified.is_empty());
        assert_eq!(d.bundle, expected_bundle());
    }

    #[test]
    fn fallback_single_clause_and_unclassifiable() {
        let d = decompose_fallback("stay on grass");
        assert_eq!(d.bundle.behav_actions, v(&["stay on"]));
        assert_eq!(d.bundle.behav_targets, v(&["grass"]));
        assert!(d.bundle.nav_actions.is_empty() && d.bundle.nav_landmarks.is_empty());

        let d = decompose_fallback("dance wildly");
        assert_eq!(d.unclassified, vec![UnclassifiableClause("dance wildly".into())]);
        assert!(d.bundle.is_empty());
    }

    #[test]
    fn fallback_splits_and_only_before_verbs() {
        let d = decompose_fallback("Stay on the sand and grass and avoid water puddles.");
        assert_eq!(d.bundle.behav_actions, v(&["stay on", "avoid"]));
        assert_eq!(d.bundle.behav_targets, v(&["sand and grass", "water puddles"]));
    }

    #[test]
    fn fallback_nested_caution_clause() {
        let d = decompose_fallback("Stay on tiles, and use caution to follow stairs");
        assert_eq!(d.bundle.behav_actions, v(&["stay on", "use caution", "follow"]));
        assert_eq!(d.bundle.behav_targets, v(&["tiles", "stairs", "stairs"]));
        let d = decompose_fallback("watch your step on the stairs");
        assert_eq!(d.bundle.behav_targets, v(&["stairs"]));
    }

    #[test]
    fn decompose_via_backend() {
        let ok = Canned(Ok(json!({
            "nav_actions": ["go forward until"],
            "nav_landmarks": ["a building with blue glasses"],
            "behav_actions": ["stay on", "stop for", "stay away from"],
            "behav_targets": ["pavements", "stop sign", "grass"],
        })));
        let p = PromptSet::with_instruction(SAMPLE_INSTR);
        assert_eq!(decompose(SAMPLE_INSTR, &p, &ok).unwrap(), expected_bundle());

        let mismatched = Canned(Ok(json!({
            "nav_actions": [], "nav_landmarks": [],
            "behav_actions": ["stay on", "stop for", "avoid"],
            "behav_targets": ["pavements", "stop sign"],
        })));
        assert!(matches!(
            decompose(SAMPLE_INSTR, &p, &mismatched),
            Err(InstructionError::MalformedResponse(_))
        ));

        let down = Canned(Err(BackendError::Unavailable("refused".into())));
        assert!(matches!(
            decompose(SAMPLE_INSTR, &p, &down),
            Err(InstructionError::BackendUnavailable(_))
        ));
    }

    #[test]
    fn empty_instruction_is_vacuous() {
        let down = Canned(Err(BackendError::Unavailable("unused".into())));
        let b = decompose("   ", &PromptSet::with_instruction(""), &down).unwrap();
        assert!(b.is_empty());
        assert!(decompose_fallback("").bundle.is_empty());
    }

    #[test]
    fn prompt_embeds_instruction() {
        let p = PromptSet::with_instruction(SAMPLE_INSTR);
        let r = p.render_decompose();
        assert!(r.contains(SAMPLE_INSTR));
        assert!(r.contains("behav_targets"));
        assert!(p.render_frontier("red door").contains("\"red door\""));
    }

    #[test]
    fn desirability_backend_clamps_and_validates() {
        let p = PromptSet::with_instruction("x");
        let acts = v(&["stop for", "follow"]);
        let b = Canned(Ok(json!({"values": [-0.005, 1.008]})));
        assert_eq!(score_desirability(&acts, &p, &b).unwrap().values, vec![0.0, 1.0]);
        let b = Canned(Ok(json!({"values": [0.5, 1.7]})));
        assert!(matches!(
            score_desirability(&acts, &p, &b),
            Err(InstructionError::MalformedResponse(_))
        ));
        let b = Canned(Ok(json!({"values": [0.5]})));
        assert!(score_desirability(&acts, &p, &b).is_err());
        assert!(score_desirability(&[], &p, &b).unwrap().values.is_empty());
    }

    #[test]
    fn fallback_table_values() {
        assert_eq!(
            score_desirability_fallback(&v(&["stay on", "stop for", "stay away from"])).values,
            vec![0.9, 0.0, 0.1]
        );
        assert_eq!(score_desirability_fallback(&v(&["use caution"])).values, vec![0.5]);
        assert!(score_desirability_fallback(&[]).values.is_empty());
        assert_eq!(score_desirability_fallback(&v(&["follow"])).values, vec![0.9]);
        assert_eq!(score_desirability_fallback(&v(&["juggle"])).values, vec![0.5]);
    }

    #[test]
    fn pairing() {
        let b = expected_bundle();
        let s = score_desirability_fallback(&b.behav_actions);
        let rules = pair_rules(&b, &s).unwrap();
        let u: Vec<f64> = rules.iter().map(|r| r.undesirability).collect();
        assert_eq!(u, vec![1.0 - 0.9, 1.0, 1.0 - 0.1]);
        assert_eq!(rules[1].target, "stop sign");
        assert!(pair_rules(&InstructionBundle::default(), &DesirabilityVector::default())
            .unwrap()
            .is_empty());
        let mut short = b.clone();
        short.behav_actions.truncate(2);
        short.behav_targets.truncate(2);
        assert!(matches!(
            pair_rules(&short, &s),
            Err(InstructionError::LengthMismatch { actions: 2, scores: 3, .. })
        ));
    }

    #[test]
    fn gait_flag() {
        assert!(gait_caution_flag(&v(&["stay on", "use caution"])));
        assert!(gait_caution_flag(&v(&["watch your step"])));
        assert!(!gait_caution_flag(&v(&["stop for"])));
    }

    proptest! {
        #[test]
        fn fallback_is_deterministic_and_aligned(s in "[a-z ,]{0,80}") {
            let a = decompose_fallback(&s);
            let b = decompose_fallback(&s);
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.bundle.behav_actions.len(), a.bundle.behav_targets.len());
            prop_assert_eq!(a.bundle.nav_actions.len(), a.bundle.nav_landmarks.len());
        }

        #[test]
        fn rules_are_complementary(p in 0.0..=1.0f64) {
            let r = BehaviorRule::new("a", "b", p);
            prop_assert!((r.undesirability + r.desirability - 1.0).abs() <= f64::EPSILON);
            prop_assert_eq!(r.undesirability, 1.0 - r.desirability);
        }
    }
}
