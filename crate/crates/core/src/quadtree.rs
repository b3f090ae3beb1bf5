//! Point quadtree with nearest-neighbour and radius queries.
//!
//! Entries are `(position, id)` pairs. Nearest-neighbour ties are broken by
//! the smaller id, so results agree exactly with a linear scan that uses the
//! same ordering.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{Point2, Rect};

pub const DEFAULT_LEAF_CAPACITY: usize = 16;
pub const DEFAULT_MAX_DEPTH: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub pos: Point2,
    pub id: u32,
}

#[derive(Debug, Clone)]
enum Kind {
    Leaf(Vec<Entry>),
    // SW, SE, NW, NE
    Branch([usize; 4]),
}

#[derive(Debug, Clone)]
struct Node {
    rect: Rect,
    depth: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
pub struct Quadtree {
    nodes: Vec<Node>,
    len: usize,
    leaf_capacity: usize,
    max_depth: usize,
}

impl Quadtree {
    pub fn new(bounds: Rect) -> Self {
        Self::with_limits(bounds, DEFAULT_LEAF_CAPACITY, DEFAULT_MAX_DEPTH)
    }

    pub fn with_limits(bounds: Rect, leaf_capacity: usize, max_depth: usize) -> Self {
        Self {
            nodes: vec![Node {
                rect: bounds,
                depth: 0,
                kind: Kind::Leaf(Vec::new()),
            }],
            len: 0,
            leaf_capacity: leaf_capacity.max(1),
            max_depth,
        }
    }

    /// Builds a tree whose bounds enclose every entry.
    pub fn from_entries(entries: impl IntoIterator<Item = Entry>) -> Self {
        let entries: Vec<Entry> = entries.into_iter().collect();
        let mut tree = Self::new(bounding_square(entries.iter().map(|e| e.pos)));
        for e in entries {
            tree.insert(e.pos, e.id);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bounds(&self) -> Rect {
        self.nodes[0].rect
    }

    /// Inserts an entry. Points outside the current bounds trigger a rebuild
    /// over an enlarged root.
    pub fn insert(&mut self, pos: Point2, id: u32) {
        if !self.bounds().contains(pos) {
            self.grow_to_include(pos);
        }
        let mut node = 0;
        loop {
            let rect = self.nodes[node].rect;
            match &mut self.nodes[node].kind {
                Kind::Branch(children) => {
                    node = children[quadrant(&rect, pos)];
                }
                Kind::Leaf(items) => {
                    items.push(Entry { pos, id });
                    self.len += 1;
                    if items.len() > self.leaf_capacity && self.nodes[node].depth < self.max_depth {
                        self.split(node);
                    }
                    return;
                }
            }
        }
    }

    /// Removes the entry `id` stored at exactly `pos`. Returns whether it was
    /// present.
    pub fn remove(&mut self, pos: Point2, id: u32) -> bool {
        if !self.bounds().contains(pos) {
            return false;
        }
        let mut node = 0;
        loop {
            let rect = self.nodes[node].rect;
            match &mut self.nodes[node].kind {
                Kind::Branch(children) => {
                    node = children[quadrant(&rect, pos)];
                }
                Kind::Leaf(items) => {
                    return match items.iter().position(|e| e.id == id && e.pos == pos) {
                        Some(i) => {
                            items.swap_remove(i);
                            self.len -= 1;
                            true
                        }
                        None => false,
                    };
                }
            }
        }
    }

    /// Nearest entry to `p` and its Euclidean distance.
    pub fn nearest(&self, p: Point2) -> Option<(Entry, f64)> {
        if self.len == 0 {
            return None;
        }
        let mut best: Option<(Entry, f64)> = None;
        self.nearest_in(0, p, &mut best);
        best.map(|(e, d2)| (e, libm::sqrt(d2)))
    }

    fn nearest_in(&self, node: usize, p: Point2, best: &mut Option<(Entry, f64)>) {
        match &self.nodes[node].kind {
            Kind::Leaf(items) => {
                for e in items {
                    let d2 = e.pos.distance_squared(p);
                    let better = match best {
                        None => true,
                        Some((b, bd2)) => d2 < *bd2 || (d2 == *bd2 && e.id < b.id),
                    };
                    if better {
                        *best = Some((*e, d2));
                    }
                }
            }
            Kind::Branch(children) => {
                let mut order = children.map(|c| (self.nodes[c].rect.distance_squared(p), c));
                order.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (d2, c) in order {
                    if let Some((_, bd2)) = best {
                        if d2 > *bd2 {
                            break;
                        }
                    }
                    self.nearest_in(c, p, best);
                }
            }
        }
    }

    /// Whether any entry lies within `radius` of `p` (inclusive).
    pub fn any_within(&self, p: Point2, radius: f64) -> bool {
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let n = &self.nodes[node];
            if n.rect.distance_squared(p) > r2 {
                continue;
            }
            match &n.kind {
                Kind::Leaf(items) => {
                    if items.iter().any(|e| e.pos.distance_squared(p) <= r2) {
                        return true;
                    }
                }
                Kind::Branch(children) => stack.extend_from_slice(children),
            }
        }
        false
    }

    /// Calls `visit` for every entry within `radius` of `p` (inclusive).
    pub fn for_each_within(&self, p: Point2, radius: f64, mut visit: impl FnMut(&Entry)) {
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let n = &self.nodes[node];
            if n.rect.distance_squared(p) > r2 {
                continue;
            }
            match &n.kind {
                Kind::Leaf(items) => items
                    .iter()
                    .filter(|e| e.pos.distance_squared(p) <= r2)
                    .for_each(&mut visit),
                Kind::Branch(children) => stack.extend_from_slice(children),
            }
        }
    }

    /// Entries within `radius` of `p`, sorted by id.
    pub fn within(&self, p: Point2, radius: f64) -> Vec<Entry> {
        let mut out = Vec::new();
        self.for_each_within(p, radius, |e| out.push(*e));
        out.sort_by_key(|e| e.id);
        out
    }

    pub fn entries(&self) -> impl Iterator<Item = &Entry> {
        self.nodes.iter().flat_map(|n| match &n.kind {
            Kind::Leaf(items) => items.as_slice(),
            Kind::Branch(_) => &[],
        })
    }

    fn split(&mut self, node: usize) {
        let rect = self.nodes[node].rect;
        let depth = self.nodes[node].depth + 1;
        let c = rect.center();
        let rects = [
            Rect::new(rect.min.x, rect.min.y, c.x, c.y),
            Rect::new(c.x, rect.min.y, rect.max.x, c.y),
            Rect::new(rect.min.x, c.y, c.x, rect.max.y),
            Rect::new(c.x, c.y, rect.max.x, rect.max.y),
        ];
        let first = self.nodes.len();
        for r in rects {
            self.nodes.push(Node {
                rect: r,
                depth,
                kind: Kind::Leaf(Vec::new()),
            });
        }
        let children = [first, first + 1, first + 2, first + 3];
        let items = match core::mem::replace(&mut self.nodes[node].kind, Kind::Branch(children)) {
            Kind::Leaf(items) => items,
            Kind::Branch(_) => unreachable!("split on a branch"),
        };
        for e in items {
            let child = children[quadrant(&rect, e.pos)];
            if let Kind::Leaf(v) = &mut self.nodes[child].kind {
                v.push(e);
            }
        }
        for child in children {
            let overfull = matches!(&self.nodes[child].kind, Kind::Leaf(v) if v.len() > self.leaf_capacity);
            if overfull && depth < self.max_depth {
                self.split(child);
            }
        }
    }

    fn grow_to_include(&mut self, p: Point2) {
        let mut b = self.bounds();
        while !b.contains(p) {
            let c = b.center();
            let half = b.width().max(b.height()).max(1.0);
            b = Rect::new(c.x - half * 2.0, c.y - half * 2.0, c.x + half * 2.0, c.y + half * 2.0);
        }
        let entries: Vec<Entry> = self.entries().copied().collect();
        *self = Self::with_limits(b, self.leaf_capacity, self.max_depth);
        for e in entries {
            self.insert(e.pos, e.id);
        }
    }
}

fn quadrant(rect: &Rect, p: Point2) -> usize {
    let c = rect.center();
    usize::from(p.x >= c.x) | (usize::from(p.y >= c.y) << 1)
}

fn bounding_square(points: impl Iterator<Item = Point2>) -> Rect {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    if !lo.is_finite() {
        return Rect::new(-1.0, -1.0, 1.0, 1.0);
    }
    let c = Point2::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y));
    let half = 0.5 * (hi.x - lo.x).max(hi.y - lo.y).max(1.0) + 1e-6;
    Rect::new(c.x - half, c.y - half, c.x + half, c.y + half)
}
