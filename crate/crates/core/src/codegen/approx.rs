//! Rational approximation of `tanh` used by the optional fast activation
//! path. The same coefficients and evaluation order are emitted as C.

pub(crate) const CLAMP: f32 = 7.998_811_7;
const TINY: f32 = 0.0004;
#[allow(clippy::excessive_precision)]
pub(crate) const ALPHA: [f32; 7] = [
    4.893_524_5e-3,
    6.372_619_3e-4,
    1.485_722_4e-5,
    5.122_297e-8,
    -8.604_671_5e-11,
    2.000_187_9e-13,
    -2.760_768_5e-16,
];
pub(crate) const BETA: [f32; 4] = [4.893_525e-3, 2.268_434_6e-3, 1.185_347_1e-4, 1.198_258_4e-6];

/// Odd 13/6 rational approximation of `tanh`; maximum absolute error on
/// `[-8, 8]` is well below 1e-4.
pub fn tanh_approx(x: f32) -> f32 {
    if x.abs() < TINY {
        return x;
    }
    let x = x.clamp(-CLAMP, CLAMP);
    let x2 = x * x;
    let mut p = ALPHA[6];
    for a in ALPHA[..6].iter().rev() {
        p = p * x2 + a;
    }
    p *= x;
    let mut q = BETA[3];
    for b in BETA[..3].iter().rev() {
        q = q * x2 + b;
    }
    p / q
}

pub fn sigmoid_approx(x: f32) -> f32 {
    0.5 + 0.5 * tanh_approx(0.5 * x)
}

/// C definitions of `nn_tanh_approx` / `nn_sigmoid_approx` matching the Rust
/// functions above.
pub(crate) fn c_source(need_tanh: bool, need_sigmoid: bool) -> String {
    let mut s = String::new();
    if !(need_tanh || need_sigmoid) {
        return s;
    }
    s.push_str("static float nn_tanh_approx(float x)\n{\n");
    s.push_str(&format!(
        "    float x2, p, q;\n    if (fabsf(x) < {TINY:e}f) {{\n        return x;\n    }}\n    x = fminf(fmaxf(x, -{CLAMP:e}f), {CLAMP:e}f);\n    x2 = x * x;\n"
    ));
    s.push_str(&format!("    p = {:e}f;\n", ALPHA[6]));
    for a in ALPHA[..6].iter().rev() {
        s.push_str(&format!("    p = p * x2 + {a:e}f;\n"));
    }
    s.push_str("    p = p * x;\n");
    s.push_str(&format!("    q = {:e}f;\n", BETA[3]));
    for b in BETA[..3].iter().rev() {
        s.push_str(&format!("    q = q * x2 + {b:e}f;\n"));
    }
    s.push_str("    return p / q;\n}\n\n");
    if need_sigmoid {
        s.push_str(
            "static float nn_sigmoid_approx(float x)\n{\n    return 0.5f + 0.5f * nn_tanh_approx(0.5f * x);\n}\n\n",
        );
    }
    s
}
