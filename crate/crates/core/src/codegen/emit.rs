use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codegen::approx;
use crate::codegen::footprint::{estimate_footprint, FootprintModel};
use crate::codegen::memory::{plan_memory, MemoryPlan, Storage};
use crate::ir::{num_elements, Activation, Graph, Node, Op, OpKind, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmitOptions {
    /// Replace `tanhf`/`expf`-based activations by the rational approximation.
    pub approximate_activations: bool,
}

/// Generated C sources plus the sizes needed for footprint estimates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmittedProgram {
    /// `nn.h`, `nn.c`, `weights.h`, `weights.c`.
    pub sources: BTreeMap<String, String>,
    pub input_len: usize,
    pub output_len: usize,
    pub weight_bytes: usize,
    pub arena_bytes: usize,
    /// Kind of every emitted node, in chain order.
    pub op_kinds: Vec<OpKind>,
    pub rom_estimate_bytes: usize,
    pub ram_estimate_bytes: usize,
}

impl EmittedProgram {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        for (name, text) in &self.sources {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::file(&path, e))?;
        }
        Ok(())
    }
}

/// Plans memory and emits `g` in one step.
pub fn emit_graph(g: &Graph, opts: EmitOptions) -> Result<EmittedProgram> {
    let plan = plan_memory(g);
    emit(g, &plan, opts)
}

/// Emits one loop nest per node. Activations fused into a trainable node are
/// applied in the store of its accumulation loop; accumulation order matches
/// the reference interpreter.
pub fn emit(g: &Graph, plan: &MemoryPlan, opts: EmitOptions) -> Result<EmittedProgram> {
    if plan.edges.len() != g.nodes().len() + 1 {
        return Err(Error::Codegen(format!(
            "memory plan covers {} edges, graph has {}",
            plan.edges.len(),
            g.nodes().len() + 1
        )));
    }
    let mut weights = WeightTables::default();
    let mut body = String::new();
    let mut uses = Uses::default();
    let shapes = g.shapes();

    if g.nodes().is_empty() {
        let _ = writeln!(
            body,
            "    for (int i = 0; i < {}; ++i) {{\n        output[i] = input[i];\n    }}",
            g.input_len()
        );
    }
    for (i, node) in g.nodes().iter().enumerate() {
        let src = pointer(plan, plan.edges[i]);
        let dst = pointer(plan, plan.edges[i + 1]);
        let _ = writeln!(
            body,
            "    /* {} `{}`: {:?} -> {:?} */",
            node.op.kind(),
            comment_safe(&node.id),
            shapes[i],
            shapes[i + 1]
        );
        if matches!(node.op, Op::Flatten) && plan.edges[i] == plan.edges[i + 1] {
            body.push_str("    /* view of the previous buffer */\n");
            continue;
        }
        let ctx = NodeCtx {
            index: i,
            node,
            in_shape: &shapes[i],
            out_shape: &shapes[i + 1],
            src: &src,
            dst: &dst,
            opts,
        };
        body.push_str("    {\n");
        ctx.emit_body(&mut body, &mut weights, &mut uses)?;
        body.push_str("    }\n");
    }

    let arena_floats = plan.arena_total_bytes / 4;
    let mut nn_c = String::new();
    nn_c.push_str("/* Generated by optc. */\n");
    if uses.math {
        nn_c.push_str("#include <math.h>\n\n");
    }
    nn_c.push_str("#include \"nn.h\"\n#include \"weights.h\"\n\n");
    if arena_floats > 0 {
        let _ = writeln!(nn_c, "static float nn_arena[{arena_floats}];\n");
    }
    nn_c.push_str(&approx::c_source(uses.tanh_approx, uses.sigmoid_approx));
    nn_c.push_str("int nn_inference(const float *input, float *output)\n{\n");
    nn_c.push_str(&body);
    nn_c.push_str("    return 0;\n}\n");

    let input_len = g.input_len();
    let output_len = g.output_len();
    let mut nn_h = String::new();
    let _ = write!(
        nn_h,
        "/* Generated by optc.\n * nn_inference uses a static activation arena: run one inference at a time. */\n\
         #ifndef NN_H\n#define NN_H\n\n\
         #define NN_INPUT_LEN {input_len}\n#define NN_OUTPUT_LEN {output_len}\n#define NN_ARENA_BYTES {}\n\n\
         /* Returns 0 on success. */\n\
         int nn_inference(const float *input, float *output);\n\n#endif\n",
        plan.arena_total_bytes
    );

    let (weights_h, weights_c) = weights.render();
    let weight_bytes = weights.bytes();
    let mut sources = BTreeMap::new();
    sources.insert("nn.h".to_string(), nn_h);
    sources.insert("nn.c".to_string(), nn_c);
    sources.insert("weights.h".to_string(), weights_h);
    sources.insert("weights.c".to_string(), weights_c);

    let mut program = EmittedProgram {
        sources,
        input_len,
        output_len,
        weight_bytes,
        arena_bytes: plan.arena_total_bytes,
        op_kinds: g.nodes().iter().map(|n| n.op.kind()).collect(),
        rom_estimate_bytes: 0,
        ram_estimate_bytes: 0,
    };
    let (rom, ram) = estimate_footprint(&program, &FootprintModel::default());
    program.rom_estimate_bytes = rom;
    program.ram_estimate_bytes = ram;
    Ok(program)
}

fn pointer(plan: &MemoryPlan, s: Storage) -> String {
    match s {
        Storage::Input => "input".into(),
        Storage::Output => "output".into(),
        Storage::Arena(b) => format!("(nn_arena + {})", plan.buffers[b].offset / 4),
    }
}

fn comment_safe(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_-.:".contains(c) {
                c
            } else {
                '?'
            }
        })
        .collect()
}

#[derive(Default)]
struct Uses {
    math: bool,
    tanh_approx: bool,
    sigmoid_approx: bool,
}

#[derive(Default)]
struct WeightTables {
    tables: Vec<(String, Vec<f32>)>,
}

impl WeightTables {
    fn add(&mut self, name: String, t: &Tensor) -> String {
        self.tables.push((name.clone(), t.data.clone()));
        name
    }

    fn bytes(&self) -> usize {
        self.tables.iter().map(|(_, d)| 4 * d.len()).sum()
    }

    fn render(&self) -> (String, String) {
        let count: usize = self.tables.iter().map(|(_, d)| d.len()).sum();
        let mut h = String::from(
            "/* Generated by optc. */\n#ifndef NN_WEIGHTS_H\n#define NN_WEIGHTS_H\n\n",
        );
        let mut c = String::from("/* Generated by optc. */\n#include \"weights.h\"\n\n");
        let _ = writeln!(h, "extern const unsigned long nn_weight_count;");
        let _ = writeln!(c, "const unsigned long nn_weight_count = {count}UL;");
        for (name, data) in &self.tables {
            let _ = writeln!(h, "extern const float {name}[{}];", data.len());
            let _ = writeln!(c, "\nconst float {name}[{}] = {{", data.len());
            for chunk in data.chunks(8) {
                c.push_str("   ");
                for v in chunk {
                    let _ = write!(c, " {v:e}f,");
                }
                c.push('\n');
            }
            c.push_str("};\n");
        }
        h.push_str("\n#endif\n");
        (h, c)
    }
}

struct NodeCtx<'a> {
    index: usize,
    node: &'a Node,
    in_shape: &'a [usize],
    out_shape: &'a [usize],
    src: &'a str,
    dst: &'a str,
    opts: EmitOptions,
}

impl NodeCtx<'_> {
    fn activation(&self, a: Activation, v: &str, uses: &mut Uses) -> String {
        uses.math = true;
        match (a, self.opts.approximate_activations) {
            (Activation::Relu, _) => format!("fmaxf({v}, 0.0f)"),
            (Activation::Tanh, false) => format!("tanhf({v})"),
            (Activation::Sigmoid, false) => format!("1.0f / (1.0f + expf(-{v}))"),
            (Activation::Tanh, true) => {
                uses.tanh_approx = true;
                format!("nn_tanh_approx({v})")
            }
            (Activation::Sigmoid, true) => {
                uses.tanh_approx = true;
                uses.sigmoid_approx = true;
                format!("nn_sigmoid_approx({v})")
            }
        }
    }

    fn epilogue(&self, a: Option<Activation>, uses: &mut Uses) -> String {
        a.map_or_else(|| "acc".to_string(), |a| self.activation(a, "acc", uses))
    }

    fn emit_body(&self, out: &mut String, w: &mut WeightTables, uses: &mut Uses) -> Result<()> {
        let (src, dst, i) = (self.src, self.dst, self.index);
        let _ = writeln!(
            out,
            "        const float *x = {src};\n        float *y = {dst};"
        );
        match &self.node.op {
            Op::FullyConnected(d) => {
                let wn = w.add(format!("nn_w{i}"), &d.weights);
                let init = match &d.bias {
                    Some(b) => format!("{}[o]", w.add(format!("nn_b{i}"), b)),
                    None => "0.0f".into(),
                };
                let store = self.epilogue(d.activation, uses);
                self.dense(out, &wn, &init, d.out_features(), d.in_features(), &store);
            }
            Op::MatMul(t) => {
                let wn = w.add(format!("nn_w{i}"), t);
                self.dense(out, &wn, "0.0f", t.shape[0], t.shape[1], "acc");
            }
            Op::Conv1d(c) => {
                let wn = w.add(format!("nn_w{i}"), &c.weights);
                let init = match &c.bias {
                    Some(b) => format!("{}[o]", w.add(format!("nn_b{i}"), b)),
                    None => "0.0f".into(),
                };
                let store = self.epilogue(c.activation, uses);
                let (ic, len) = (self.in_shape[0], self.in_shape[1]);
                let ol = self.out_shape[1];
                let (k, s) = (c.kernel(), c.stride);
                let _ = writeln!(
                    out,
                    "        for (int o = 0; o < {oc}; ++o) {{\n\
                     \x20           const float *w = {wn} + o * {fk};\n\
                     \x20           for (int t = 0; t < {ol}; ++t) {{\n\
                     \x20               float acc = {init};",
                    oc = c.out_channels(),
                    fk = ic * k,
                );
                if c.padding.is_zero() {
                    let _ = writeln!(out, "                const float *xs = x + t * {s};");
                    let _ = writeln!(
                        out,
                        "                for (int c = 0; c < {ic}; ++c) {{\n\
                         \x20                   for (int k = 0; k < {k}; ++k) {{\n\
                         \x20                       acc += w[c * {k} + k] * xs[c * {len} + k];\n\
                         \x20                   }}\n\
                         \x20               }}"
                    );
                } else {
                    let _ = writeln!(
                        out,
                        "                const int start = t * {s} - {pl};\n\
                         \x20               for (int c = 0; c < {ic}; ++c) {{\n\
                         \x20                   for (int k = 0; k < {k}; ++k) {{\n\
                         \x20                       const int pos = start + k;\n\
                         \x20                       if (pos >= 0 && pos < {len}) {{\n\
                         \x20                           acc += w[c * {k} + k] * x[c * {len} + pos];\n\
                         \x20                       }}\n\
                         \x20                   }}\n\
                         \x20               }}",
                        pl = c.padding.left
                    );
                }
                let _ = writeln!(
                    out,
                    "                y[o * {ol} + t] = {store};\n            }}\n        }}"
                );
            }
            Op::Add(b) => {
                let bn = w.add(format!("nn_b{i}"), b);
                let n = num_elements(self.in_shape);
                let inner = n / b.len();
                let idx = if inner == 1 {
                    "i".to_string()
                } else {
                    format!("i / {inner}")
                };
                let _ = writeln!(
                    out,
                    "        for (int i = 0; i < {n}; ++i) {{\n            y[i] = x[i] + {bn}[{idx}];\n        }}"
                );
            }
            Op::Activation(a) => {
                let n = num_elements(self.in_shape);
                let expr = self.activation(*a, "x[i]", uses);
                let _ = writeln!(
                    out,
                    "        for (int i = 0; i < {n}; ++i) {{\n            y[i] = {expr};\n        }}"
                );
            }
            Op::MaxPool1d(p) | Op::AvgPool1d(p) => {
                let (ch, len) = (self.in_shape[0], self.in_shape[1]);
                let ol = self.out_shape[1];
                let _ = writeln!(
                    out,
                    "        for (int c = 0; c < {ch}; ++c) {{\n\
                     \x20           for (int t = 0; t < {ol}; ++t) {{\n\
                     \x20               const float *win = x + c * {len} + t * {s};",
                    s = p.stride
                );
                if matches!(self.node.op, Op::MaxPool1d(_)) {
                    let _ = writeln!(
                        out,
                        "                float m = win[0];\n\
                         \x20               for (int k = 1; k < {w}; ++k) {{\n\
                         \x20                   if (win[k] > m) {{\n\
                         \x20                       m = win[k];\n\
                         \x20                   }}\n\
                         \x20               }}\n\
                         \x20               y[c * {ol} + t] = m;",
                        w = p.width
                    );
                } else {
                    let _ = writeln!(
                        out,
                        "                float sum = 0.0f;\n\
                         \x20               for (int k = 0; k < {w}; ++k) {{\n\
                         \x20                   sum += win[k];\n\
                         \x20               }}\n\
                         \x20               y[c * {ol} + t] = sum / {w}.0f;",
                        w = p.width
                    );
                }
                out.push_str("            }\n        }\n");
            }
            Op::Pad(p) => {
                let (ch, len) = (self.in_shape[0], self.in_shape[1]);
                let ol = self.out_shape[1];
                let _ = writeln!(
                    out,
                    "        for (int c = 0; c < {ch}; ++c) {{\n\
                     \x20           for (int t = 0; t < {ol}; ++t) {{\n\
                     \x20               const int pos = t - {pl};\n\
                     \x20               y[c * {ol} + t] = (pos >= 0 && pos < {len}) ? x[c * {len} + pos] : 0.0f;\n\
                     \x20           }}\n        }}",
                    pl = p.left
                );
            }
            Op::Flatten => {
                let n = num_elements(self.in_shape);
                let _ = writeln!(
                    out,
                    "        for (int i = 0; i < {n}; ++i) {{\n            y[i] = x[i];\n        }}"
                );
            }
            Op::Softmax => {
                uses.math = true;
                let n = num_elements(self.in_shape);
                let _ = writeln!(
                    out,
                    "        float m = x[0];\n\
                     \x20       float sum = 0.0f;\n\
                     \x20       for (int i = 1; i < {n}; ++i) {{\n\
                     \x20           if (x[i] > m) {{\n\
                     \x20               m = x[i];\n\
                     \x20           }}\n\
                     \x20       }}\n\
                     \x20       for (int i = 0; i < {n}; ++i) {{\n\
                     \x20           y[i] = expf(x[i] - m);\n\
                     \x20           sum += y[i];\n\
                     \x20       }}\n\
                     \x20       for (int i = 0; i < {n}; ++i) {{\n\
                     \x20           y[i] = y[i] / sum;\n\
                     \x20       }}"
                );
            }
        }
        Ok(())
    }

    fn dense(&self, out: &mut String, wn: &str, init: &str, outs: usize, ins: usize, store: &str) {
        let _ = writeln!(
            out,
            "        for (int o = 0; o < {outs}; ++o) {{\n\
             \x20           const float *w = {wn} + o * {ins};\n\
             \x20           float acc = {init};\n\
             \x20           for (int i = 0; i < {ins}; ++i) {{\n\
             \x20               acc += w[i] * x[i];\n\
             \x20           }}\n\
             \x20           y[o] = {store};\n\
             \x20       }}"
        );
    }
}
