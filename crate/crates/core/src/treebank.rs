//! Penn-Treebank style bracketed constituency trees.
//!
//! A tree is a nest of labeled nodes. Pre-terminals carry the surface token
//! directly (`(NN dog)` is a single node labeled `NN` with token `dog`), so
//! the number of nodes always equals the number of `(` in the canonical text.

use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("unbalanced parentheses at byte {position}")]
    UnbalancedParens { position: usize },
    #[error("empty node at byte {position}")]
    EmptyNode { position: usize },
    #[error("trailing input at byte {position}")]
    TrailingGarbage { position: usize },
    #[error("node at byte {position} mixes bare tokens with child nodes")]
    MixedChildren { position: usize },
    #[error("empty input")]
    EmptyInput,
}

/// One constituent. Leaves (pre-terminals) have a token and no children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    label: String,
    children: Vec<Node>,
    token: Option<String>,
}

impl Node {
    pub fn leaf(label: impl Into<String>, token: impl Into<String>) -> Self {
        Node { label: label.into(), children: Vec::new(), token: Some(token.into()) }
    }

    /// Panics if `children` is empty; use [`Node::leaf`] for terminals.
    pub fn interior(label: impl Into<String>, children: Vec<Node>) -> Self {
        assert!(!children.is_empty(), "interior node needs at least one child");
        Node { label: label.into(), children, token: None }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn children(&self) -> &[Node] {
        &self.children
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    pub fn is_leaf(&self) -> bool {
        self.token.is_some()
    }

    /// Leaf tokens of this subtree in sentence order.
    pub fn yield_tokens(&self) -> Vec<&str> {
        self.leaves().filter_map(Node::token).collect()
    }

    /// Leaf nodes of this subtree in sentence order.
    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        PreOrder::new(self).filter(|n| n.is_leaf())
    }

    pub fn walk(&self) -> PreOrder<'_> {
        PreOrder::new(self)
    }

    fn write_canonical(&self, out: &mut String) {
        out.push('(');
        out.push_str(&self.label);
        match &self.token {
            Some(tok) => {
                out.push(' ');
                out.push_str(&escape_token(tok));
            }
            None => {
                for child in &self.children {
                    out.push(' ');
                    child.write_canonical(out);
                }
            }
        }
        out.push(')');
    }
}

/// A parsed sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseTree {
    root: Node,
}

impl ParseTree {
    pub fn new(root: Node) -> Self {
        ParseTree { root }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Pre-order traversal: parent before children, children left to right.
    pub fn walk_nodes(&self) -> PreOrder<'_> {
        PreOrder::new(&self.root)
    }

    pub fn yield_tokens(&self) -> Vec<&str> {
        self.root.yield_tokens()
    }

    /// Single-space bracketed form; `parse_bracketed` of it returns an equal tree.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        self.root.write_canonical(&mut out);
        out
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical())
    }
}

pub struct PreOrder<'a> {
    stack: Vec<&'a Node>,
}

impl<'a> PreOrder<'a> {
    fn new(root: &'a Node) -> Self {
        PreOrder { stack: vec![root] }
    }
}

impl<'a> Iterator for PreOrder<'a> {
    type Item = &'a Node;

    fn next(&mut self) -> Option<&'a Node> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

pub fn yield_tokens(node: &Node) -> Vec<&str> {
    node.yield_tokens()
}

pub fn walk_nodes(tree: &ParseTree) -> PreOrder<'_> {
    tree.walk_nodes()
}

fn decode_token(raw: &str) -> String {
    match raw {
        "-LRB-" => "(".to_string(),
        "-RRB-" => ")".to_string(),
        other => other.to_string(),
    }
}

fn escape_token(tok: &str) -> String {
    match tok {
        "(" => "-LRB-".to_string(),
        ")" => "-RRB-".to_string(),
        other => other.to_string(),
    }
}

/// Drops functional tags (`NP-SBJ` -> `NP`, `NP-SBJ-1` -> `NP`) from interior labels.
fn strip_function_tags(label: &str) -> &str {
    if label == "-LRB-" || label == "-RRB-" {
        return label;
    }
    match label.find('-') {
        Some(0) | None => label,
        Some(i) => &label[..i],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(text: &str) -> Vec<(usize, Tok<'_>)> {
    let mut toks = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = start.take() {
                toks.push((s, Tok::Atom(&text[s..i])));
            }
            if c == '(' {
                toks.push((i, Tok::Open));
            } else if c == ')' {
                toks.push((i, Tok::Close));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        toks.push((s, Tok::Atom(&text[s..])));
    }
    toks
}

enum Partial {
    Children(Vec<Node>),
    Token(String),
    Nothing,
}

struct Frame {
    open_pos: usize,
    label: Option<String>,
    body: Partial,
}

/// Parses one bracketed tree.
///
/// A label-less outer wrapper around a single tree, as in `( (S ...) )`, is
/// unwrapped. Interior labels lose functional tags; `-LRB-`/`-RRB-` leaf
/// tokens decode to parentheses.
pub fn parse_bracketed(text: &str) -> Result<ParseTree, TreeError> {
    let toks = lex(text);
    let Some(&(first_pos, first)) = toks.first() else {
        return Err(TreeError::EmptyInput);
    };
    if first != Tok::Open {
        return Err(TreeError::TrailingGarbage { position: first_pos });
    }

    let mut stack: Vec<Frame> = Vec::new();
    let mut finished: Option<Node> = None;

    for &(pos, tok) in &toks {
        if finished.is_some() {
            return Err(TreeError::TrailingGarbage { position: pos });
        }
        match tok {
            Tok::Open => stack.push(Frame { open_pos: pos, label: None, body: Partial::Nothing }),
            Tok::Atom(atom) => {
                let Some(frame) = stack.last_mut() else {
                    return Err(TreeError::TrailingGarbage { position: pos });
                };
                if frame.label.is_none() && matches!(frame.body, Partial::Nothing) {
                    frame.label = Some(atom.to_string());
                } else {
                    match frame.body {
                        Partial::Nothing => frame.body = Partial::Token(decode_token(atom)),
                        _ => return Err(TreeError::MixedChildren { position: frame.open_pos }),
                    }
                }
            }
            Tok::Close => {
                let Some(frame) = stack.pop() else {
                    return Err(TreeError::UnbalancedParens { position: pos });
                };
                match close_frame(frame)? {
                    Some(node) => match stack.last_mut() {
                        Some(parent) => match &mut parent.body {
                            Partial::Children(children) => children.push(node),
                            Partial::Nothing => parent.body = Partial::Children(vec![node]),
                            Partial::Token(_) => {
                                return Err(TreeError::MixedChildren { position: parent.open_pos })
                            }
                        },
                        None => finished = Some(node),
                    },
                    None => unreachable!("close_frame returns a node or an error"),
                }
            }
        }
    }

    if let Some(frame) = stack.first() {
        return Err(TreeError::UnbalancedParens { position: frame.open_pos });
    }
    let root = finished.ok_or(TreeError::EmptyInput)?;
    Ok(ParseTree::new(root))
}

fn close_frame(frame: Frame) -> Result<Option<Node>, TreeError> {
    let position = frame.open_pos;
    match (frame.label, frame.body) {
        (None, Partial::Nothing) => Err(TreeError::EmptyNode { position }),
        (Some(_), Partial::Nothing) => Err(TreeError::EmptyNode { position }),
        (Some(label), Partial::Token(token)) => Ok(Some(Node::leaf(label, token))),
        (Some(label), Partial::Children(children)) => {
            let label = strip_function_tags(&label).to_string();
            Ok(Some(Node::interior(label, children)))
        }
        // `( (S ...) )`: the unlabeled wrapper adds no information.
        (None, Partial::Children(mut children)) if children.len() == 1 => Ok(children.pop()),
        (None, Partial::Children(_)) => Err(TreeError::EmptyNode { position }),
        (None, Partial::Token(_)) => unreachable!("first atom always becomes the label"),
    }
}

/// A tree together with the sentence it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeSource {
    pub sentence_id: String,
    pub raw: String,
    pub tree: ParseTree,
}

#[derive(Debug, Serialize, Deserialize)]
struct TreeLine {
    id: String,
    tree: String,
}

#[derive(Debug, Error)]
pub enum TreeFileError {
    #[error("line {line}: {source}")]
    Tree { line: usize, source: TreeError },
    #[error("line {line}: malformed JSON: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

impl TreeFileError {
    pub fn line(&self) -> Option<usize> {
        match self {
            TreeFileError::Tree { line, .. }
            | TreeFileError::Json { line, .. }
            | TreeFileError::DuplicateId { line, .. } => Some(*line),
            TreeFileError::Io(_) => None,
        }
    }
}

/// Encodes one `.trees.jsonl` line.
pub fn tree_line(id: &str, tree: &ParseTree) -> String {
    serde_json::to_string(&TreeLine { id: id.to_string(), tree: tree.to_canonical() })
        .expect("string fields always serialize")
}

/// Reads a `.trees.jsonl` stream: one `{"id": ..., "tree": ...}` object per
/// line, blank lines ignored, ids unique.
pub fn read_trees_jsonl<R: BufRead>(reader: R) -> Result<Vec<TreeSource>, TreeFileError> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TreeLine = serde_json::from_str(&line)
            .map_err(|e| TreeFileError::Json { line: line_no, message: e.to_string() })?;
        let tree = parse_bracketed(&rec.tree)
            .map_err(|source| TreeFileError::Tree { line: line_no, source })?;
        if !seen.insert(rec.id.clone()) {
            return Err(TreeFileError::DuplicateId { line: line_no, id: rec.id });
        }
        out.push(TreeSource { sentence_id: rec.id, raw: rec.tree, tree });
    }
    Ok(out)
}
