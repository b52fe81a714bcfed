use serde::Serialize;

use crate::ir::{num_elements, Graph, Op};

/// Where an activation edge lives at run time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Storage {
    /// The caller's input buffer (graph input, or a flatten view of it).
    Input,
    /// The caller's output buffer.
    Output,
    /// Arena buffer with the given index into [`MemoryPlan::buffers`].
    Arena(usize),
}

/// One arena allocation. Steps are node indices in chain order; a buffer is
/// live from the step that writes it through the last step that reads it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ArenaBuffer {
    pub byte_size: usize,
    pub first_def: usize,
    pub last_use: usize,
    pub offset: usize,
}

impl ArenaBuffer {
    pub fn end(&self) -> usize {
        self.offset + self.byte_size
    }

    pub fn lifetime_overlaps(&self, other: &ArenaBuffer) -> bool {
        self.first_def <= other.last_use && other.first_def <= self.last_use
    }

    pub fn range_overlaps(&self, other: &ArenaBuffer) -> bool {
        self.offset < other.end() && other.offset < self.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MemoryPlan {
    /// Storage of every edge; entry `i` is the input of node `i`, the last
    /// entry is the graph output.
    pub edges: Vec<Storage>,
    pub buffers: Vec<ArenaBuffer>,
    pub arena_total_bytes: usize,
}

impl MemoryPlan {
    /// Largest number of bytes simultaneously live at any step.
    pub fn peak_live_bytes(&self) -> usize {
        let steps = self.edges.len().saturating_sub(1);
        (0..steps)
            .map(|s| {
                self.buffers
                    .iter()
                    .filter(|b| b.first_def <= s && s <= b.last_use)
                    .map(|b| b.byte_size)
                    .sum()
            })
            .max()
            .unwrap_or(0)
    }
}

/// Assigns every intermediate edge to the caller buffers or to an offset in
/// a single static arena.
///
/// `Flatten` produces no new buffer: its output is a view of its input, whose
/// lifetime is extended accordingly. When lifetimes form a chain (each buffer
/// overlaps only its neighbours) buffers alternate between the bottom and the
/// top of an arena sized to the largest adjacent pair, which is the peak live
/// size. Other interval patterns fall back to greedy best-fit by size.
pub fn plan_memory(g: &Graph) -> MemoryPlan {
    let shapes = g.shapes();
    let n = g.nodes().len();
    let mut edges = Vec::with_capacity(n + 1);
    let mut buffers: Vec<ArenaBuffer> = Vec::new();
    edges.push(Storage::Input);

    for (i, node) in g.nodes().iter().enumerate() {
        let out_edge = i + 1;
        let storage = if out_edge == n {
            Storage::Output
        } else if matches!(node.op, Op::Flatten) {
            edges[i]
        } else {
            buffers.push(ArenaBuffer {
                byte_size: 4 * num_elements(&shapes[out_edge]),
                first_def: i,
                last_use: i + 1,
                offset: 0,
            });
            Storage::Arena(buffers.len() - 1)
        };
        // A view extends the lifetime of the buffer it reads from.
        if let Storage::Arena(b) = storage {
            buffers[b].last_use = buffers[b].last_use.max(i + 1);
        }
        edges.push(storage);
    }

    let arena_total_bytes = if is_chain(&buffers) {
        place_alternating(&mut buffers)
    } else {
        place_best_fit(&mut buffers)
    };
    MemoryPlan {
        edges,
        buffers,
        arena_total_bytes,
    }
}

fn is_chain(buffers: &[ArenaBuffer]) -> bool {
    (0..buffers.len())
        .all(|i| (i + 2..buffers.len()).all(|j| !buffers[i].lifetime_overlaps(&buffers[j])))
}

fn place_alternating(buffers: &mut [ArenaBuffer]) -> usize {
    let mut total = buffers.iter().map(|b| b.byte_size).max().unwrap_or(0);
    for pair in buffers.windows(2) {
        if pair[0].lifetime_overlaps(&pair[1]) {
            total = total.max(pair[0].byte_size + pair[1].byte_size);
        }
    }
    for (i, b) in buffers.iter_mut().enumerate() {
        b.offset = if i % 2 == 0 { 0 } else { total - b.byte_size };
    }
    total
}

fn place_best_fit(buffers: &mut [ArenaBuffer]) -> usize {
    let mut order: Vec<usize> = (0..buffers.len()).collect();
    order.sort_by(|&a, &b| {
        buffers[b]
            .byte_size
            .cmp(&buffers[a].byte_size)
            .then(buffers[a].first_def.cmp(&buffers[b].first_def))
    });
    let mut placed: Vec<usize> = Vec::new();
    let mut total = 0;
    for idx in order {
        let mut busy: Vec<(usize, usize)> = placed
            .iter()
            .filter(|&&p| buffers[p].lifetime_overlaps(&buffers[idx]))
            .map(|&p| (buffers[p].offset, buffers[p].end()))
            .collect();
        busy.sort_unstable();
        let size = buffers[idx].byte_size;
        let mut best: Option<(usize, usize)> = None;
        let mut cursor = 0;
        for &(start, end) in &busy {
            if start >= cursor + size {
                let gap = start - cursor;
                if best.is_none_or(|(_, g)| gap < g) {
                    best = Some((cursor, gap));
                }
            }
            cursor = cursor.max(end);
        }
        let offset = best.map_or(cursor, |(o, _)| o);
        buffers[idx].offset = offset;
        total = total.max(offset + size);
        placed.push(idx);
    }
    total
}
