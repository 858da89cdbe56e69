//! Reasoning chain data model: step identity, ordering, the dependency
//! graph, and structural edits with downstream invalidation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::{CommandKind, EditCommand, EditScope};

/// Identity of a step. Monotonic within a chain and never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepId(u64);

impl StepId {
    pub fn get(self) -> u64 {
        self.0
    }
}

impl fmt::Display for StepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Fresh,
    /// Scheduled for regeneration before the chain can be finalized.
    Stale,
    UserEdited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ModelGenerated,
    UserAuthored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningStep {
    pub id: StepId,
    pub ordinal: u32,
    pub text: String,
    pub status: StepStatus,
    pub provenance: Provenance,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("duplicate or non-increasing ordinal {0}")]
    DuplicateOrdinal(u32),
    #[error("ordinal must be positive")]
    ZeroOrdinal,
    #[error("step {0} has empty text")]
    EmptyStepText(u32),
    #[error("no step {0} in the chain")]
    UnknownStep(u32),
    #[error("{0} is not part of the dependency graph")]
    UnknownStepId(StepId),
    #[error("steps {0} and {1} are not adjacent and cannot be merged")]
    MergeNonAdjacent(u32, u32),
    #[error("replacement text is empty")]
    EmptyReplacementText,
    #[error("dependency ({0}, {1}) must point from an earlier to a later step")]
    InvalidDependency(usize, usize),
    #[error("`{0}` does not change the chain")]
    NotStructural(String),
}

/// Edges `(from, to)` meaning "`to` logically depends on `from`".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    nodes: BTreeSet<StepId>,
    edges: BTreeSet<(StepId, StepId)>,
}

impl DependencyGraph {
    pub fn nodes(&self) -> &BTreeSet<StepId> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(StepId, StepId)> {
        &self.edges
    }

    pub fn contains(&self, id: StepId) -> bool {
        self.nodes.contains(&id)
    }

    fn add_node(&mut self, id: StepId) {
        self.nodes.insert(id);
    }

    fn add_edge(&mut self, from: StepId, to: StepId) {
        debug_assert!(from != to);
        self.edges.insert((from, to));
    }

    fn predecessors(&self, id: StepId) -> Vec<StepId> {
        self.edges
            .iter()
            .filter(|(_, to)| *to == id)
            .map(|(from, _)| *from)
            .collect()
    }

    fn successors(&self, id: StepId) -> Vec<StepId> {
        self.edges
            .range((id, StepId(0))..)
            .take_while(|(from, _)| *from == id)
            .map(|(_, to)| *to)
            .collect()
    }

    /// Drops `id` and reconnects its predecessors to its successors, so
    /// transitive dependencies survive the removal.
    fn remove_node(&mut self, id: StepId) {
        let preds = self.predecessors(id);
        let succs = self.successors(id);
        self.edges.retain(|(from, to)| *from != id && *to != id);
        self.nodes.remove(&id);
        for p in &preds {
            for s in &succs {
                self.edges.insert((*p, *s));
            }
        }
    }

    /// Every step reachable through out-edges from `id`, excluding `id`.
    pub fn descendants(&self, id: StepId) -> Result<BTreeSet<StepId>, ChainError> {
        if !self.contains(id) {
            return Err(ChainError::UnknownStepId(id));
        }
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([id]);
        while let Some(next) = queue.pop_front() {
            for succ in self.successors(next) {
                if seen.insert(succ) {
                    queue.push_back(succ);
                }
            }
        }
        seen.remove(&id);
        Ok(seen)
    }

    /// Kahn's algorithm; true when every node can be ordered.
    pub fn is_acyclic(&self) -> bool {
        let mut indegree: BTreeMap<StepId, usize> = self.nodes.iter().map(|n| (*n, 0)).collect();
        for (_, to) in &self.edges {
            *indegree.entry(*to).or_default() += 1;
        }
        let mut ready: Vec<StepId> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(n, _)| *n)
            .collect();
        let mut visited = 0;
        while let Some(n) = ready.pop() {
            visited += 1;
            for s in self.successors(n) {
                let d = indegree.get_mut(&s).expect("edge endpoint is a node");
                *d -= 1;
                if *d == 0 {
                    ready.push(s);
                }
            }
        }
        visited == indegree.len()
    }
}

/// Free function form of [`DependencyGraph::descendants`].
pub fn descendants(graph: &DependencyGraph, id: StepId) -> Result<BTreeSet<StepId>, ChainError> {
    graph.descendants(id)
}

/// A structural edit whose ordinal targets have been resolved to step ids.
///
/// Compound utterances resolve every target against the chain as the user
/// saw it, before any of the edits are applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolvedEdit {
    Replace { id: StepId, text: String },
    Delete { id: StepId },
    Merge { first: StepId, second: StepId },
    Insert { after: Option<StepId>, text: String },
}

/// Result of applying one structural edit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditEffect {
    pub chain: ReasoningChain,
    /// Steps marked stale by this edit.
    pub invalidated: BTreeSet<StepId>,
    /// Steps created, rewritten or removed by the user.
    pub edited: BTreeSet<StepId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningChain {
    steps: Vec<ReasoningStep>,
    graph: DependencyGraph,
    next_id: u64,
}

fn clean_text(text: &str) -> Option<String> {
    let trimmed = text.trim();
    (!trimmed.is_empty()).then(|| trimmed.to_string())
}

impl ReasoningChain {
    /// Builds a chain with the linear dependency policy: every step depends
    /// on all steps before it.
    pub fn new<S: AsRef<str>>(steps: &[(u32, S)]) -> Result<Self, ChainError> {
        let n = steps.len();
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .collect();
        Self::with_dependencies(steps, &edges)
    }

    /// Builds a chain with an explicit graph given as `(from, to)` list
    /// positions. Every edge must point forward.
    pub fn with_dependencies<S: AsRef<str>>(
        steps: &[(u32, S)],
        edges: &[(usize, usize)],
    ) -> Result<Self, ChainError> {
        let mut chain = ReasoningChain::default();
        let mut last = 0u32;
        for (ordinal, text) in steps {
            if *ordinal == 0 {
                return Err(ChainError::ZeroOrdinal);
            }
            if *ordinal <= last {
                return Err(ChainError::DuplicateOrdinal(*ordinal));
            }
            last = *ordinal;
            let text = clean_text(text.as_ref()).ok_or(ChainError::EmptyStepText(*ordinal))?;
            let id = chain.fresh_id();
            chain.graph.add_node(id);
            chain.steps.push(ReasoningStep {
                id,
                ordinal: *ordinal,
                text,
                status: StepStatus::Fresh,
                provenance: Provenance::ModelGenerated,
            });
        }
        for &(from, to) in edges {
            if from >= to || to >= chain.steps.len() {
                return Err(ChainError::InvalidDependency(from, to));
            }
            let (a, b) = (chain.steps[from].id, chain.steps[to].id);
            chain.graph.add_edge(a, b);
        }
        Ok(chain)
    }

    fn fresh_id(&mut self) -> StepId {
        let id = StepId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn steps(&self) -> &[ReasoningStep] {
        &self.steps
    }

    pub fn graph(&self) -> &DependencyGraph {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step(&self, id: StepId) -> Option<&ReasoningStep> {
        self.steps.iter().find(|s| s.id == id)
    }

    pub fn by_ordinal(&self, ordinal: u32) -> Option<&ReasoningStep> {
        self.steps.iter().find(|s| s.ordinal == ordinal)
    }

    fn position(&self, id: StepId) -> Option<usize> {
        self.steps.iter().position(|s| s.id == id)
    }

    fn id_for(&self, ordinal: u32) -> Result<StepId, ChainError> {
        self.by_ordinal(ordinal)
            .map(|s| s.id)
            .ok_or(ChainError::UnknownStep(ordinal))
    }

    pub fn stale_steps(&self) -> impl Iterator<Item = &ReasoningStep> {
        self.steps.iter().filter(|s| s.status == StepStatus::Stale)
    }

    pub fn has_stale(&self) -> bool {
        self.stale_steps().next().is_some()
    }

    /// Maximal runs of adjacent stale steps, as ordinals.
    pub fn stale_blocks(&self) -> Vec<Vec<u32>> {
        let mut blocks: Vec<Vec<u32>> = Vec::new();
        let mut current = Vec::new();
        for step in &self.steps {
            if step.status == StepStatus::Stale {
                current.push(step.ordinal);
            } else if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            blocks.push(current);
        }
        blocks
    }

    /// Overwrites a step's text with regenerated model output and marks it fresh.
    pub fn set_regenerated(&mut self, ordinal: u32, text: &str) -> Result<(), ChainError> {
        let text = clean_text(text).ok_or(ChainError::EmptyStepText(ordinal))?;
        let step = self
            .steps
            .iter_mut()
            .find(|s| s.ordinal == ordinal)
            .ok_or(ChainError::UnknownStep(ordinal))?;
        step.text = text;
        step.status = StepStatus::Fresh;
        step.provenance = Provenance::ModelGenerated;
        Ok(())
    }

    /// Clears the stale mark on every step without touching text.
    pub fn mark_all_fresh(&mut self) {
        for step in &mut self.steps {
            if step.status == StepStatus::Stale {
                step.status = StepStatus::Fresh;
            }
        }
    }

    /// Maps a structural command's ordinals onto step ids.
    pub fn resolve(&self, command: &EditCommand) -> Result<ResolvedEdit, ChainError> {
        match &command.kind {
            CommandKind::Replace { target, text } => Ok(ResolvedEdit::Replace {
                id: self.id_for(*target)?,
                text: text.clone(),
            }),
            CommandKind::Delete { target } => Ok(ResolvedEdit::Delete {
                id: self.id_for(*target)?,
            }),
            CommandKind::Merge { first, second } => Ok(ResolvedEdit::Merge {
                first: self.id_for(*first)?,
                second: self.id_for(*second)?,
            }),
            CommandKind::Insert { after, text } => Ok(ResolvedEdit::Insert {
                after: after.map(|n| self.id_for(n)).transpose()?,
                text: text.clone(),
            }),
            _ => Err(ChainError::NotStructural(command.describe())),
        }
    }

    /// Applies an already-resolved edit, returning the new chain.
    pub fn apply_resolved(&self, edit: &ResolvedEdit, scope: EditScope) -> Result<EditEffect, ChainError> {
        let mut chain = self.clone();
        let mut edited = BTreeSet::new();
        let mut renumber = true;
        let affected = match edit {
            ResolvedEdit::Replace { id, text } => {
                let text = clean_text(text).ok_or(ChainError::EmptyReplacementText)?;
                let pos = chain.position(*id).ok_or(ChainError::UnknownStepId(*id))?;
                let step = &mut chain.steps[pos];
                step.text = text;
                step.status = StepStatus::UserEdited;
                step.provenance = Provenance::UserAuthored;
                edited.insert(*id);
                renumber = false;
                chain.graph.descendants(*id)?
            }
            ResolvedEdit::Delete { id } => {
                let pos = chain.position(*id).ok_or(ChainError::UnknownStepId(*id))?;
                let below = chain.graph.descendants(*id)?;
                chain.graph.remove_node(*id);
                chain.steps.remove(pos);
                edited.insert(*id);
                below
            }
            ResolvedEdit::Merge { first, second } => {
                let a = chain.position(*first).ok_or(ChainError::UnknownStepId(*first))?;
                let b = chain.position(*second).ok_or(ChainError::UnknownStepId(*second))?;
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                if hi != lo + 1 {
                    let (oa, ob) = (chain.steps[a].ordinal, chain.steps[b].ordinal);
                    return Err(ChainError::MergeNonAdjacent(oa, ob));
                }
                let (lo_id, hi_id) = (chain.steps[lo].id, chain.steps[hi].id);
                let text = format!("{}\n\n{}", chain.steps[lo].text, chain.steps[hi].text);
                let merged = chain.fresh_id();

                let mut preds = chain.graph.predecessors(lo_id);
                preds.extend(chain.graph.predecessors(hi_id));
                let mut succs = chain.graph.successors(lo_id);
                succs.extend(chain.graph.successors(hi_id));
                chain
                    .graph
                    .edges
                    .retain(|(f, t)| ![lo_id, hi_id].contains(f) && ![lo_id, hi_id].contains(t));
                chain.graph.nodes.remove(&lo_id);
                chain.graph.nodes.remove(&hi_id);
                chain.graph.add_node(merged);
                for p in preds.into_iter().filter(|p| *p != lo_id && *p != hi_id) {
                    chain.graph.add_edge(p, merged);
                }
                for s in succs.into_iter().filter(|s| *s != lo_id && *s != hi_id) {
                    chain.graph.add_edge(merged, s);
                }

                chain.steps.remove(hi);
                chain.steps[lo] = ReasoningStep {
                    id: merged,
                    ordinal: chain.steps[lo].ordinal,
                    text,
                    status: StepStatus::UserEdited,
                    provenance: Provenance::UserAuthored,
                };
                edited.extend([lo_id, hi_id, merged]);
                chain.graph.descendants(merged)?
            }
            ResolvedEdit::Insert { after, text } => {
                let text = clean_text(text).ok_or(ChainError::EmptyReplacementText)?;
                let pos = match after {
                    Some(id) => chain.position(*id).ok_or(ChainError::UnknownStepId(*id))? + 1,
                    None => 0,
                };
                let id = chain.fresh_id();
                chain.graph.add_node(id);
                for earlier in &chain.steps[..pos] {
                    chain.graph.edges.insert((earlier.id, id));
                }
                for later in &chain.steps[pos..] {
                    chain.graph.edges.insert((id, later.id));
                }
                chain.steps.insert(
                    pos,
                    ReasoningStep {
                        id,
                        ordinal: 0,
                        text,
                        status: StepStatus::UserEdited,
                        provenance: Provenance::UserAuthored,
                    },
                );
                edited.insert(id);
                chain.graph.descendants(id)?
            }
        };

        let invalidated = match scope {
            EditScope::Cascade => affected,
            EditScope::Local => BTreeSet::new(),
        };
        for step in &mut chain.steps {
            if invalidated.contains(&step.id) {
                step.status = StepStatus::Stale;
            }
        }
        if renumber {
            for (i, step) in chain.steps.iter_mut().enumerate() {
                step.ordinal = i as u32 + 1;
            }
        }
        Ok(EditEffect {
            chain,
            invalidated,
            edited,
        })
    }

    /// Resolves and applies one structural command.
    pub fn apply_edit(&self, command: &EditCommand) -> Result<EditEffect, ChainError> {
        let edit = self.resolve(command)?;
        self.apply_resolved(&edit, command.scope)
    }
}

/// Builds a chain from `(ordinal, text)` pairs under the linear policy.
pub fn new_chain<S: AsRef<str>>(steps: &[(u32, S)]) -> Result<ReasoningChain, ChainError> {
    ReasoningChain::new(steps)
}

/// Applies a structural command, returning the new chain and the steps it invalidated.
pub fn apply_edit(
    chain: &ReasoningChain,
    command: &EditCommand,
) -> Result<(ReasoningChain, BTreeSet<StepId>), ChainError> {
    chain.apply_edit(command).map(|e| (e.chain, e.invalidated))
}
