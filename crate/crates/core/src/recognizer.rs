//! Incremental recognition of the GBNF subset.
//!
//! A [`Recognizer`] compiles a [`Grammar`] into a flat element array and steps
//! a breadth-first set of parse stacks over input bytes, one byte at a time.
//! At every point the stack set encodes all viable continuations, which is
//! what [`Recognizer::allowed_token_mask`] queries to decide which vocabulary
//! tokens may be emitted next and whether the sequence may terminate.
//!
//! Literals are matched as raw bytes, so multi-byte tokens that close one
//! literal and open the next are handled without special cases.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use smallvec::SmallVec;

use crate::bitset::Bitset;
use crate::grammar::{Alternate, Element, Grammar, Repetition};

/// Default cap on the number of live parse stacks. Highlight grammars peak at
/// O(words); the cap exists to fail fast on adversarial hand-written input.
pub const DEFAULT_STACK_LIMIT: usize = 4096;

/// Vocabularies below this size are masked sequentially even when the
/// `parallel` feature is enabled; the fork/join overhead dominates.
#[cfg(feature = "parallel")]
const PARALLEL_MASK_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum RecognizerError {
    #[error("rule `{rule}` is left-recursive; the stack-set recognizer cannot run it")]
    LeftRecursion { rule: String },
    #[error("parse stack set exceeded the limit of {limit} stacks")]
    StackLimitExceeded { limit: usize },
}

// ---------------------------------------------------------------------------
// Compiled form

/// One slot of the flattened grammar. Each rule is a run of alternates
/// separated by `Alt` and terminated by `End`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Byte(u8),
    Rule(u32),
    Alt,
    End,
}

#[derive(Debug)]
struct CompiledGrammar {
    slots: Vec<Slot>,
    /// Per rule: position of each alternate's first slot. An empty alternate
    /// points directly at its `Alt`/`End` marker.
    alt_starts: Vec<Vec<u32>>,
    rule_names: Vec<String>,
    root: u32,
}

impl CompiledGrammar {
    #[inline]
    fn ends_sequence(&self, pos: u32) -> bool {
        matches!(self.slots[pos as usize], Slot::Alt | Slot::End)
    }
}

/// Intermediate per-rule bodies before flattening.
type Body = Vec<Vec<Sym>>;

#[derive(Debug, Clone, Copy)]
enum Sym {
    Byte(u8),
    Rule(usize),
}

struct Compiler {
    bodies: Vec<Body>,
    names: Vec<String>,
}

impl Compiler {
    fn compile(grammar: &Grammar) -> Result<CompiledGrammar, RecognizerError> {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let mut compiler = Compiler {
            bodies: Vec::new(),
            names: Vec::new(),
        };
        for (i, (name, _)) in grammar.rules().enumerate() {
            ids.insert(name, i);
            compiler.bodies.push(Vec::new());
            compiler.names.push(name.to_string());
        }
        for (i, (_, alternates)) in grammar.rules().enumerate() {
            let body: Body = alternates
                .iter()
                .map(|alt| compiler_compile_alt(&mut compiler, alt, &ids, i))
                .collect();
            compiler.bodies[i] = body;
        }
        let root = ids[grammar.root_rule()] as u32;
        compiler.reject_left_recursion()?;
        Ok(compiler.flatten(root))
    }

    fn new_synthetic(&mut self, parent: usize) -> usize {
        let id = self.bodies.len();
        self.bodies.push(Vec::new());
        self.names.push(format!("{}#{}", self.names[parent], id));
        id
    }

    fn nullable(&self) -> Vec<bool> {
        let mut nullable = vec![false; self.bodies.len()];
        loop {
            let mut changed = false;
            for (r, body) in self.bodies.iter().enumerate() {
                if nullable[r] {
                    continue;
                }
                let is_nullable = body.iter().any(|alt| {
                    alt.iter().all(|sym| match sym {
                        Sym::Byte(_) => false,
                        Sym::Rule(s) => nullable[*s],
                    })
                });
                if is_nullable {
                    nullable[r] = true;
                    changed = true;
                }
            }
            if !changed {
                return nullable;
            }
        }
    }

    /// A rule is left-recursive if it can reach itself through rule references
    /// preceded only by nullable symbols. Such grammars would loop the
    /// epsilon closure, so they are rejected at compile time.
    fn reject_left_recursion(&self) -> Result<(), RecognizerError> {
        let nullable = self.nullable();
        let edges: Vec<Vec<usize>> = self
            .bodies
            .iter()
            .map(|body| {
                let mut targets = Vec::new();
                for alt in body {
                    for sym in alt {
                        match sym {
                            Sym::Byte(_) => break,
                            Sym::Rule(s) => {
                                targets.push(*s);
                                if !nullable[*s] {
                                    break;
                                }
                            }
                        }
                    }
                }
                targets
            })
            .collect();

        // Tri-color DFS over the left-edge graph.
        const WHITE: u8 = 0;
        const GRAY: u8 = 1;
        const BLACK: u8 = 2;
        let mut color = vec![WHITE; edges.len()];
        for start in 0..edges.len() {
            if color[start] != WHITE {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
            color[start] = GRAY;
            while let Some(top) = stack.len().checked_sub(1) {
                let (node, next) = stack[top];
                if next < edges[node].len() {
                    stack[top].1 += 1;
                    let target = edges[node][next];
                    match color[target] {
                        GRAY => {
                            return Err(RecognizerError::LeftRecursion {
                                rule: self.names[target].clone(),
                            })
                        }
                        WHITE => {
                            color[target] = GRAY;
                            stack.push((target, 0));
                        }
                        _ => {}
                    }
                } else {
                    color[node] = BLACK;
                    stack.pop();
                }
            }
        }
        Ok(())
    }

    fn flatten(self, root: u32) -> CompiledGrammar {
        let mut slots = Vec::new();
        let mut alt_starts = Vec::with_capacity(self.bodies.len());
        for body in &self.bodies {
            let mut starts = Vec::with_capacity(body.len());
            for (i, alt) in body.iter().enumerate() {
                starts.push(slots.len() as u32);
                for sym in alt {
                    slots.push(match sym {
                        Sym::Byte(b) => Slot::Byte(*b),
                        Sym::Rule(r) => Slot::Rule(*r as u32),
                    });
                }
                slots.push(if i + 1 == body.len() { Slot::End } else { Slot::Alt });
            }
            if body.is_empty() {
                // Unreachable for grammars built by the parser, but keep the
                // layout self-consistent.
                starts.push(slots.len() as u32);
                slots.push(Slot::End);
            }
            alt_starts.push(starts);
        }
        CompiledGrammar {
            slots,
            alt_starts,
            rule_names: self.names,
            root,
        }
    }
}

fn compiler_compile_alt(
    compiler: &mut Compiler,
    alt: &Alternate,
    ids: &HashMap<&str, usize>,
    parent: usize,
) -> Vec<Sym> {
    let mut out = Vec::new();
    for element in alt {
        compile_element(compiler, element, ids, parent, &mut out);
    }
    out
}

fn compile_element(
    compiler: &mut Compiler,
    element: &Element,
    ids: &HashMap<&str, usize>,
    parent: usize,
    out: &mut Vec<Sym>,
) {
    match element {
        Element::Literal(text) => out.extend(text.bytes().map(Sym::Byte)),
        Element::RuleRef(name) => out.push(Sym::Rule(ids[name.as_str()])),
        Element::Group {
            alternates,
            repetition,
        } => {
            // A once-group with a single alternate is inlined; everything else
            // becomes a synthetic rule.
            if *repetition == Repetition::Once && alternates.len() == 1 {
                for inner in &alternates[0] {
                    compile_element(compiler, inner, ids, parent, out);
                }
                return;
            }
            let id = compiler.new_synthetic(parent);
            let mut body: Body = alternates
                .iter()
                .map(|inner| {
                    let mut seq = compiler_compile_alt(compiler, inner, ids, parent);
                    if *repetition == Repetition::ZeroOrMore {
                        seq.push(Sym::Rule(id));
                    }
                    seq
                })
                .collect();
            match repetition {
                Repetition::Once => {}
                Repetition::Optional | Repetition::ZeroOrMore => body.push(Vec::new()),
            }
            compiler.bodies[id] = body;
            out.push(Sym::Rule(id));
        }
    }
}

// ---------------------------------------------------------------------------
// Recognition

/// One parse stack: grammar positions with the active one on top.
type Stack = SmallVec<[u32; 8]>;

/// The set of all viable parse stacks after consuming some byte prefix.
///
/// An empty stack in the set is a complete parse; an empty *set* means the
/// consumed bytes are not a prefix of any sentence (`REJECTED`). Stacks are
/// kept sorted and deduplicated so equal byte prefixes produce identical
/// states regardless of how the bytes were chunked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecognizerState {
    stacks: Vec<Stack>,
    consumed: usize,
}

impl RecognizerState {
    /// True when no continuation is possible and end-of-input is not
    /// acceptable either.
    pub fn is_rejected(&self) -> bool {
        self.stacks.is_empty()
    }

    /// Bytes consumed so far (up to the point of rejection for rejected
    /// states).
    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn stack_count(&self) -> usize {
        self.stacks.len()
    }
}

fn canonicalize(stacks: &mut Vec<Stack>) {
    stacks.sort_unstable();
    stacks.dedup();
}

/// A compiled grammar ready for byte-level stepping. Cheap to clone and safe
/// to share across threads; per-decode mutable progress lives in
/// [`RecognizerState`].
#[derive(Debug, Clone)]
pub struct Recognizer {
    grammar: Arc<CompiledGrammar>,
    initial: Vec<Stack>,
    stack_limit: usize,
}

impl Recognizer {
    pub fn compile(grammar: &Grammar) -> Result<Self, RecognizerError> {
        Self::compile_with_limit(grammar, DEFAULT_STACK_LIMIT)
    }

    pub fn compile_with_limit(
        grammar: &Grammar,
        stack_limit: usize,
    ) -> Result<Self, RecognizerError> {
        let compiled = Arc::new(Compiler::compile(grammar)?);
        let mut initial = Vec::new();
        for &alt_start in &compiled.alt_starts[compiled.root as usize] {
            let mut stack = Stack::new();
            if !compiled.ends_sequence(alt_start) {
                stack.push(alt_start);
            }
            closure(&compiled, stack, &mut initial, stack_limit)?;
        }
        canonicalize(&mut initial);
        Ok(Recognizer {
            grammar: compiled,
            initial,
            stack_limit,
        })
    }

    /// State with zero bytes consumed.
    pub fn initial_state(&self) -> RecognizerState {
        RecognizerState {
            stacks: self.initial.clone(),
            consumed: 0,
        }
    }

    /// Consume `bytes` in order. Returns the successor state, which is
    /// rejected if any byte was unconsumable by every stack. Advancing an
    /// already rejected state is a contract violation.
    pub fn advance_bytes(
        &self,
        state: &RecognizerState,
        bytes: &[u8],
    ) -> Result<RecognizerState, RecognizerError> {
        assert!(
            !state.is_rejected(),
            "advance_bytes called on a rejected state"
        );
        let mut stacks = state.stacks.clone();
        let mut consumed = state.consumed;
        for &byte in bytes {
            match self.step(&stacks, byte)? {
                Some(next) => {
                    stacks = next;
                    consumed += 1;
                }
                None => {
                    return Ok(RecognizerState {
                        stacks: Vec::new(),
                        consumed,
                    })
                }
            }
        }
        Ok(RecognizerState { stacks, consumed })
    }

    /// True iff a complete parse of the consumed bytes exists.
    pub fn accepts_end(&self, state: &RecognizerState) -> bool {
        assert!(
            !state.is_rejected(),
            "accepts_end called on a rejected state"
        );
        state.stacks.iter().any(|s| s.is_empty())
    }

    /// Distinct bytes that may be consumed next, ascending.
    pub fn allowed_bytes(&self, state: &RecognizerState) -> Vec<u8> {
        let mut seen = [false; 256];
        for stack in &state.stacks {
            if let Some(&top) = stack.last() {
                if let Slot::Byte(b) = self.grammar.slots[top as usize] {
                    seen[b as usize] = true;
                }
            }
        }
        (0u16..256).filter(|&b| seen[b as usize]).map(|b| b as u8).collect()
    }

    /// Advance one byte over a stack set. `None` means no stack consumed it.
    fn step(&self, stacks: &[Stack], byte: u8) -> Result<Option<Vec<Stack>>, RecognizerError> {
        let g = &self.grammar;
        let mut out = Vec::with_capacity(stacks.len());
        for stack in stacks {
            let Some(&top) = stack.last() else {
                continue; // complete parse cannot consume more bytes
            };
            if let Slot::Byte(expected) = g.slots[top as usize] {
                if expected == byte {
                    let mut next = stack.clone();
                    next.pop();
                    if !g.ends_sequence(top + 1) {
                        next.push(top + 1);
                    }
                    closure(g, next, &mut out, self.stack_limit)?;
                }
            }
        }
        if out.is_empty() {
            return Ok(None);
        }
        canonicalize(&mut out);
        if out.len() > self.stack_limit {
            return Err(RecognizerError::StackLimitExceeded {
                limit: self.stack_limit,
            });
        }
        Ok(Some(out))
    }

    /// Token mask for the current state: bit `i` is set iff token `i`'s full
    /// byte-string is consumable; the EOS bit equals [`Self::accepts_end`].
    ///
    /// Shared token prefixes are advanced once via a trie over the
    /// vocabulary; with the `parallel` feature large vocabularies are
    /// partitioned across threads at the trie root.
    pub fn allowed_token_mask(
        &self,
        state: &RecognizerState,
        vocabulary: &Vocabulary,
    ) -> Result<TokenMask, RecognizerError> {
        assert!(
            !state.is_rejected(),
            "allowed_token_mask called on a rejected state"
        );
        #[cfg(feature = "parallel")]
        if vocabulary.len() >= PARALLEL_MASK_THRESHOLD {
            return self.mask_parallel(state, vocabulary);
        }
        self.allowed_token_mask_seq(state, vocabulary)
    }

    /// Sequential trie walk; same result as [`Self::allowed_token_mask`].
    pub fn allowed_token_mask_seq(
        &self,
        state: &RecognizerState,
        vocabulary: &Vocabulary,
    ) -> Result<TokenMask, RecognizerError> {
        let trie = vocabulary.trie();
        let mut allowed = Bitset::zeros(vocabulary.len());
        self.mask_walk(trie, 0, &state.stacks, &mut allowed)?;
        Ok(self.finish_mask(state, vocabulary, allowed))
    }

    #[cfg(feature = "parallel")]
    fn mask_parallel(
        &self,
        state: &RecognizerState,
        vocabulary: &Vocabulary,
    ) -> Result<TokenMask, RecognizerError> {
        let trie = vocabulary.trie();
        let len = vocabulary.len();
        let allowed = trie.nodes[0]
            .children
            .par_iter()
            .map(|&(byte, child)| {
                let mut local = Bitset::zeros(len);
                if let Some(next) = self.step(&state.stacks, byte)? {
                    self.mask_walk(trie, child as usize, &next, &mut local)?;
                }
                Ok(local)
            })
            .try_reduce(
                || Bitset::zeros(len),
                |mut a, b| {
                    a.union_with(&b);
                    Ok(a)
                },
            )?;
        Ok(self.finish_mask(state, vocabulary, allowed))
    }

    fn mask_walk(
        &self,
        trie: &TokenTrie,
        node: usize,
        stacks: &[Stack],
        allowed: &mut Bitset,
    ) -> Result<(), RecognizerError> {
        let node = &trie.nodes[node];
        for &token in &node.token_ids {
            allowed.set(token as usize, true);
        }
        for &(byte, child) in &node.children {
            if let Some(next) = self.step(stacks, byte)? {
                self.mask_walk(trie, child as usize, &next, allowed)?;
            }
        }
        Ok(())
    }

    fn finish_mask(
        &self,
        state: &RecognizerState,
        vocabulary: &Vocabulary,
        mut allowed: Bitset,
    ) -> TokenMask {
        let end_acceptable = self.accepts_end(state);
        allowed.set(vocabulary.eos_id() as usize, end_acceptable);
        TokenMask {
            allowed,
            end_acceptable,
            eos_id: vocabulary.eos_id(),
        }
    }

    /// Reference mask implementation: advance every token independently.
    /// Used by tests and benches to check the trie walk.
    pub fn allowed_token_mask_naive(
        &self,
        state: &RecognizerState,
        vocabulary: &Vocabulary,
    ) -> Result<TokenMask, RecognizerError> {
        let mut allowed = Bitset::zeros(vocabulary.len());
        for id in 0..vocabulary.len() as u32 {
            if id == vocabulary.eos_id() {
                continue;
            }
            let next = self.advance_bytes(state, vocabulary.token_bytes(id))?;
            if !next.is_rejected() {
                allowed.set(id as usize, true);
            }
        }
        Ok(self.finish_mask(state, vocabulary, allowed))
    }

    /// Full-string membership: consume all bytes, then require end-of-input
    /// acceptance.
    pub fn accepts(&self, bytes: &[u8]) -> Result<bool, RecognizerError> {
        let state = self.advance_bytes(&self.initial_state(), bytes)?;
        Ok(!state.is_rejected() && self.accepts_end(&state))
    }

    /// Byte offset of the first dead end, or `None` when all bytes are
    /// consumable (the string may still be a strict prefix; check
    /// [`Self::accepts_end`]).
    pub fn first_rejection(&self, bytes: &[u8]) -> Result<Option<usize>, RecognizerError> {
        let state = self.advance_bytes(&self.initial_state(), bytes)?;
        if state.is_rejected() {
            Ok(Some(state.consumed()))
        } else {
            Ok(None)
        }
    }

    pub fn rule_name(&self, id: u32) -> &str {
        &self.grammar.rule_names[id as usize]
    }
}

/// Epsilon closure: expand rule references until every stack either is empty
/// or has a byte slot on top.
fn closure(
    grammar: &CompiledGrammar,
    stack: Stack,
    out: &mut Vec<Stack>,
    stack_limit: usize,
) -> Result<(), RecognizerError> {
    if out.len() >= stack_limit {
        return Err(RecognizerError::StackLimitExceeded { limit: stack_limit });
    }
    let Some(&top) = stack.last() else {
        out.push(stack);
        return Ok(());
    };
    match grammar.slots[top as usize] {
        Slot::Byte(_) => out.push(stack),
        Slot::Rule(rule) => {
            for &alt_start in &grammar.alt_starts[rule as usize] {
                let mut next = stack.clone();
                next.pop();
                if !grammar.ends_sequence(top + 1) {
                    next.push(top + 1);
                }
                if !grammar.ends_sequence(alt_start) {
                    next.push(alt_start);
                }
                closure(grammar, next, out, stack_limit)?;
            }
        }
        Slot::Alt | Slot::End => unreachable!("stacks never point at separators"),
    }
    Ok(())
}

/// Membership test: `s ∈ L(g)`. Compiles the grammar each call; reuse a
/// [`Recognizer`] for repeated queries.
pub fn accepts_string(grammar: &Grammar, s: &[u8]) -> Result<bool, RecognizerError> {
    Recognizer::compile(grammar)?.accepts(s)
}

// ---------------------------------------------------------------------------
// Vocabulary and token mask

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum VocabularyError {
    #[error("eos_id {eos_id} out of range for vocabulary of {len} tokens")]
    EosOutOfRange { eos_id: u32, len: usize },
    #[error("token {id} has an empty byte-string; only EOS may be empty")]
    EmptyToken { id: u32 },
}

/// Dense token-id-to-bytes table with a distinguished EOS id.
#[derive(Debug)]
pub struct Vocabulary {
    tokens: Vec<Vec<u8>>,
    eos_id: u32,
    trie: OnceLock<TokenTrie>,
}

impl Clone for Vocabulary {
    fn clone(&self) -> Self {
        Vocabulary {
            tokens: self.tokens.clone(),
            eos_id: self.eos_id,
            trie: OnceLock::new(),
        }
    }
}

impl Vocabulary {
    pub fn new(tokens: Vec<Vec<u8>>, eos_id: u32) -> Result<Self, VocabularyError> {
        if eos_id as usize >= tokens.len() {
            return Err(VocabularyError::EosOutOfRange {
                eos_id,
                len: tokens.len(),
            });
        }
        for (id, token) in tokens.iter().enumerate() {
            if token.is_empty() && id as u32 != eos_id {
                return Err(VocabularyError::EmptyToken { id: id as u32 });
            }
        }
        Ok(Vocabulary {
            tokens,
            eos_id,
            trie: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn eos_id(&self) -> u32 {
        self.eos_id
    }

    pub fn token_bytes(&self, id: u32) -> &[u8] {
        &self.tokens[id as usize]
    }

    /// Prefix trie over all non-EOS tokens, built once on first use.
    fn trie(&self) -> &TokenTrie {
        self.trie.get_or_init(|| TokenTrie::build(self))
    }
}

#[derive(Debug)]
struct TrieNode {
    /// Sorted by byte for deterministic traversal order.
    children: Vec<(u8, u32)>,
    token_ids: SmallVec<[u32; 1]>,
}

#[derive(Debug)]
struct TokenTrie {
    nodes: Vec<TrieNode>,
}

impl TokenTrie {
    fn build(vocabulary: &Vocabulary) -> Self {
        let mut nodes = vec![TrieNode {
            children: Vec::new(),
            token_ids: SmallVec::new(),
        }];
        for (id, token) in vocabulary.tokens.iter().enumerate() {
            if id as u32 == vocabulary.eos_id {
                continue;
            }
            let mut node = 0usize;
            for &byte in token {
                node = match nodes[node].children.binary_search_by_key(&byte, |c| c.0) {
                    Ok(i) => nodes[node].children[i].1 as usize,
                    Err(i) => {
                        let child = nodes.len() as u32;
                        nodes.push(TrieNode {
                            children: Vec::new(),
                            token_ids: SmallVec::new(),
                        });
                        nodes[node].children.insert(i, (byte, child));
                        child as usize
                    }
                };
            }
            nodes[node].token_ids.push(id as u32);
        }
        TokenTrie { nodes }
    }
}

/// Which tokens may be sampled next, plus end-of-sequence legality.
///
/// The EOS bit always equals `end_acceptable`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMask {
    allowed: Bitset,
    end_acceptable: bool,
    eos_id: u32,
}

impl TokenMask {
    /// Build a mask from raw bits. The EOS bit is forced to `end_acceptable`.
    pub fn new(mut allowed: Bitset, end_acceptable: bool, eos_id: u32) -> Self {
        allowed.set(eos_id as usize, end_acceptable);
        TokenMask {
            allowed,
            end_acceptable,
            eos_id,
        }
    }

    /// Mask allowing every token; EOS legality still applies.
    pub fn all_allowed(vocabulary: &Vocabulary) -> Self {
        TokenMask {
            allowed: Bitset::ones(vocabulary.len()),
            end_acceptable: true,
            eos_id: vocabulary.eos_id(),
        }
    }

    pub fn len(&self) -> usize {
        self.allowed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.is_empty()
    }

    pub fn is_allowed(&self, id: u32) -> bool {
        self.allowed.get(id as usize)
    }

    pub fn end_acceptable(&self) -> bool {
        self.end_acceptable
    }

    pub fn eos_id(&self) -> u32 {
        self.eos_id
    }

    pub fn allowed_count(&self) -> usize {
        self.allowed.count_ones()
    }

    pub fn iter_allowed(&self) -> impl Iterator<Item = u32> + '_ {
        self.allowed.iter_ones().map(|i| i as u32)
    }
}
