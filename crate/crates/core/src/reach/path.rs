//! Witness paths through a Dyck state graph.
//!
//! In pushdown mode a witness must be a valid stack evolution starting from
//! an empty stack: every pop matches the most recent unmatched push, while
//! pushes may stay open at the end. Shortest such paths are found by first
//! computing shortest balanced distances from every segment start (the origin
//! and push targets) to a fixpoint, then running Dijkstra over segment starts.
//! Finite-mode graphs carry no such guarantee and use plain BFS.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use super::*;

/// Previous segment start, the state that pushed, and the pushed frame.
type Via = (usize, usize, usize);

/// Shortest stack-respecting path of states from `from` to `to`, both
/// included; `None` when `to` is unreachable.
pub fn reconstruct_path(
    r: &AnalysisResult,
    from: &ControlState,
    to: &ControlState,
) -> Option<Vec<ControlState>> {
    let edges = reconstruct_edges(r, from, to)?;
    let mut out = vec![from.clone()];
    out.extend(edges.into_iter().map(|e| e.to));
    Some(out)
}

/// Like [`reconstruct_path`] but returns the traversed edges.
pub fn reconstruct_edges(
    r: &AnalysisResult,
    from: &ControlState,
    to: &ControlState,
) -> Option<Vec<Edge>> {
    if !r.dsg.nodes.contains(from) || !r.dsg.nodes.contains(to) {
        return None;
    }
    if from == to {
        return Some(Vec::new());
    }
    let g = Graph::new(&r.dsg);
    let (s, t) = (g.id[from], g.id[to]);
    let steps = match r.mode {
        Mode::Pushdown => Cfl::new(&g).shortest(s, t)?,
        Mode::Finite => g.bfs(s, t)?,
    };
    Some(
        steps
            .into_iter()
            .map(|(a, act, b)| Edge {
                from: g.nodes[a].clone(),
                action: g.action(act),
                to: g.nodes[b].clone(),
            })
            .collect(),
    )
}

/// Replays the stack actions along `edges` from an empty stack. Returns the
/// depth left at the end, or a description of the first violation.
pub fn replay_stack(edges: &[Edge]) -> Result<usize, String> {
    let mut stack: Vec<&Frame> = Vec::new();
    for (i, e) in edges.iter().enumerate() {
        if i > 0 && edges[i - 1].to != e.from {
            return Err(alloc::format!(
                "edge {i} does not continue from the previous edge"
            ));
        }
        match &e.action {
            StackAction::NoOp => {}
            StackAction::Push(f) => stack.push(f),
            StackAction::Pop(f) => match stack.pop() {
                Some(top) if top == f => {}
                Some(_) => return Err(alloc::format!("edge {i} pops a frame that is not on top")),
                None => return Err(alloc::format!("edge {i} pops an empty stack")),
            },
        }
    }
    Ok(stack.len())
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Act {
    NoOp,
    Push(usize),
    Pop(usize),
}

type Step = (usize, Act, usize);

struct Graph<'a> {
    nodes: Vec<&'a ControlState>,
    id: BTreeMap<&'a ControlState, usize>,
    frames: Vec<&'a Frame>,
    out: Vec<Vec<(Act, usize)>>,
    /// frame → (pop source, pop target)
    pops: Vec<Vec<(usize, usize)>>,
}

impl<'a> Graph<'a> {
    fn new(dsg: &'a DyckStateGraph) -> Self {
        let nodes: Vec<&ControlState> = dsg.nodes.iter().collect();
        let id: BTreeMap<&ControlState, usize> =
            nodes.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let mut frames: Vec<&Frame> = Vec::new();
        let mut fid: BTreeMap<&Frame, usize> = BTreeMap::new();
        let mut frame_id = |f: &'a Frame| {
            *fid.entry(f).or_insert_with(|| {
                frames.push(f);
                frames.len() - 1
            })
        };
        let mut out = vec![Vec::new(); nodes.len()];
        let mut pop_list = Vec::new();
        for e in &dsg.edges {
            let (a, b) = (id[&e.from], id[&e.to]);
            let act = match &e.action {
                StackAction::NoOp => Act::NoOp,
                StackAction::Push(f) => Act::Push(frame_id(f)),
                StackAction::Pop(f) => {
                    let f = frame_id(f);
                    pop_list.push((f, a, b));
                    Act::Pop(f)
                }
            };
            out[a].push((act, b));
        }
        let mut pops = vec![Vec::new(); frames.len()];
        for (f, a, b) in pop_list {
            pops[f].push((a, b));
        }
        Graph {
            nodes,
            id,
            frames,
            out,
            pops,
        }
    }

    fn action(&self, act: Act) -> StackAction {
        match act {
            Act::NoOp => StackAction::NoOp,
            Act::Push(f) => StackAction::Push(self.frames[f].clone()),
            Act::Pop(f) => StackAction::Pop(self.frames[f].clone()),
        }
    }

    fn bfs(&self, s: usize, t: usize) -> Option<Vec<Step>> {
        let mut pred: BTreeMap<usize, (usize, Act)> = BTreeMap::new();
        let mut queue = VecDeque::from([s]);
        let mut seen = BTreeSet::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == t {
                let mut path = Vec::new();
                let mut v = t;
                while v != s {
                    let (p, act) = pred[&v];
                    path.push((p, act, v));
                    v = p;
                }
                path.reverse();
                return Some(path);
            }
            for &(act, v) in &self.out[u] {
                if seen.insert(v) {
                    pred.insert(v, (u, act));
                    queue.push_back(v);
                }
            }
        }
        None
    }
}

#[derive(Clone, Copy)]
enum Pred {
    Start,
    NoOp(usize),
    /// Through push `u → v` with frame `f`, balanced `v ⇝ w`, then the pop out of `w`.
    Summary {
        u: usize,
        f: usize,
        v: usize,
        w: usize,
    },
}

type Dist = BTreeMap<usize, (u64, Pred)>;

struct Cfl<'g, 'a> {
    g: &'g Graph<'a>,
    /// Shortest balanced distances from each segment start.
    bal: BTreeMap<usize, Dist>,
}

impl<'g, 'a> Cfl<'g, 'a> {
    fn new(g: &'g Graph<'a>) -> Self {
        Cfl {
            g,
            bal: BTreeMap::new(),
        }
    }

    /// Dijkstra from `x` over no-op edges and summary edges priced by the
    /// current balanced distances. New push targets are reported in `found`.
    fn balanced_from(&self, x: usize, found: &mut BTreeSet<usize>) -> Dist {
        let mut dist: Dist = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        dist.insert(x, (0, Pred::Start));
        heap.push(Reverse((0u64, x)));
        let mut done = BTreeSet::new();
        while let Some(Reverse((d, u))) = heap.pop() {
            if !done.insert(u) {
                continue;
            }
            let mut relax = |y: usize, nd: u64, p: Pred, dist: &mut Dist| {
                if dist.get(&y).is_none_or(|&(old, _)| nd < old) {
                    dist.insert(y, (nd, p));
                    heap.push(Reverse((nd, y)));
                }
            };
            for &(act, v) in &self.g.out[u] {
                match act {
                    Act::NoOp => relax(v, d + 1, Pred::NoOp(u), &mut dist),
                    Act::Push(f) => {
                        found.insert(v);
                        let Some(inner) = self.bal.get(&v) else {
                            continue;
                        };
                        for &(w, z) in &self.g.pops[f] {
                            if let Some(&(dw, _)) = inner.get(&w) {
                                relax(z, d + dw + 2, Pred::Summary { u, f, v, w }, &mut dist);
                            }
                        }
                    }
                    Act::Pop(_) => {}
                }
            }
        }
        dist
    }

    /// Computes balanced distances for every segment start reachable from `s`.
    fn saturate(&mut self, s: usize) {
        let mut starts: BTreeSet<usize> = BTreeSet::from([s]);
        loop {
            let mut changed = false;
            let mut found = BTreeSet::new();
            for &x in &starts {
                let dist = self.balanced_from(x, &mut found);
                let same = self.bal.get(&x).is_some_and(|old| {
                    old.len() == dist.len()
                        && old
                            .iter()
                            .all(|(k, (d, _))| dist.get(k).is_some_and(|e| e.0 == *d))
                });
                if !same {
                    changed = true;
                    self.bal.insert(x, dist);
                }
            }
            let before = starts.len();
            starts.extend(found);
            if !changed && starts.len() == before {
                break;
            }
        }
    }

    fn shortest(&mut self, s: usize, t: usize) -> Option<Vec<Step>> {
        self.saturate(s);
        // Dijkstra over segment starts; an open push ends each segment.
        let mut dist: BTreeMap<usize, (u64, Option<Via>)> = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        dist.insert(s, (0, None));
        heap.push(Reverse((0u64, s)));
        let mut done = BTreeSet::new();
        let mut best: Option<(u64, usize)> = None;
        while let Some(Reverse((d, x))) = heap.pop() {
            if !done.insert(x) {
                continue;
            }
            let inner = &self.bal[&x];
            if let Some(&(dt, _)) = inner.get(&t) {
                if best.is_none_or(|(b, _)| d + dt < b) {
                    best = Some((d + dt, x));
                }
            }
            for (&y, &(dy, _)) in inner {
                for &(act, v) in &self.g.out[y] {
                    if let Act::Push(f) = act {
                        let nd = d + dy + 1;
                        if dist.get(&v).is_none_or(|&(old, _)| nd < old) {
                            dist.insert(v, (nd, Some((x, y, f))));
                            heap.push(Reverse((nd, v)));
                        }
                    }
                }
            }
        }
        let (_, mut x) = best?;
        let mut segments = vec![self.expand(x, t)];
        while let Some((prev, y, f)) = dist[&x].1 {
            let mut seg = self.expand(prev, y);
            seg.push((y, Act::Push(f), x));
            segments.push(seg);
            x = prev;
        }
        segments.reverse();
        Some(segments.concat())
    }

    /// The balanced path `x ⇝ y` recorded by the predecessor maps.
    fn expand(&self, x: usize, y: usize) -> Vec<Step> {
        let dist = &self.bal[&x];
        let mut rev: Vec<Vec<Step>> = Vec::new();
        let mut cur = y;
        loop {
            match dist[&cur].1 {
                Pred::Start => break,
                Pred::NoOp(u) => {
                    rev.push(vec![(u, Act::NoOp, cur)]);
                    cur = u;
                }
                Pred::Summary { u, f, v, w } => {
                    let mut seg = vec![(u, Act::Push(f), v)];
                    seg.extend(self.expand(v, w));
                    seg.push((w, Act::Pop(f), cur));
                    rev.push(seg);
                    cur = u;
                }
            }
        }
        rev.reverse();
        rev.concat()
    }
}
