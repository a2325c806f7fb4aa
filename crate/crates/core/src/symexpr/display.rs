//! Text rendering in the parser's grammar.
//!
//! Raw parser output renders back to text that parses to the identical tree;
//! canonical (simplified) trees render to text that simplifies back to the
//! identical tree.

use std::fmt::{self, Write};

use super::{Expr, Number};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        sum_level(self, &mut out);
        f.write_str(&out)
    }
}

fn negated_coefficient(e: &Expr) -> Option<Expr> {
    match e {
        Expr::Const(c) if c.is_negative() => Some(Expr::Const(c.neg())),
        Expr::Product(fs) => match fs.first() {
            Some(Expr::Const(c)) if c.is_negative() => {
                let c = c.neg();
                let mut rest: Vec<Expr> = fs[1..].to_vec();
                if !c.is_one() {
                    rest.insert(0, Expr::Const(c));
                }
                Some(if rest.len() == 1 { rest.pop().unwrap() } else { Expr::Product(rest) })
            }
            _ => None,
        },
        _ => None,
    }
}

fn sum_level(e: &Expr, out: &mut String) {
    let Expr::Sum(terms) = e else {
        return term_level(e, out);
    };
    if terms.is_empty() {
        out.push_str("(0)");
        return;
    }
    for (i, t) in terms.iter().enumerate() {
        if i == 0 {
            term_level(t, out);
            continue;
        }
        if let Expr::Neg(inner) = t {
            out.push_str(" - ");
            term_level(inner, out);
        } else if let Some(pos) = negated_coefficient(t) {
            out.push_str(" - ");
            term_level(&pos, out);
        } else {
            out.push_str(" + ");
            term_level(t, out);
        }
    }
}

fn term_level(e: &Expr, out: &mut String) {
    match e {
        Expr::Sum(_) => {
            out.push('(');
            sum_level(e, out);
            out.push(')');
        }
        Expr::Product(fs) if fs.is_empty() => out.push_str("(1)"),
        Expr::Product(fs) => {
            let mut rest = &fs[..];
            if let [Expr::Const(c), tail @ ..] = fs.as_slice() {
                if !tail.is_empty() && c.is_negative() {
                    out.push('-');
                    rest = tail;
                    let c = c.neg();
                    if !c.is_one() {
                        constant(&c, out);
                        out.push('*');
                    }
                }
            }
            for (i, x) in rest.iter().enumerate() {
                match x {
                    Expr::Power(b, -1) if i > 0 => {
                        out.push('/');
                        factor(b, out);
                    }
                    _ => {
                        if i > 0 {
                            out.push('*');
                        }
                        factor(x, out);
                    }
                }
            }
        }
        Expr::Neg(x) => {
            out.push('-');
            match x.as_ref() {
                Expr::Sum(_) | Expr::Product(_) => {
                    out.push('(');
                    sum_level(x, out);
                    out.push(')');
                }
                other => factor(other, out),
            }
        }
        other => factor(other, out),
    }
}

fn factor(e: &Expr, out: &mut String) {
    match e {
        Expr::Const(c) => constant(c, out),
        Expr::Sym(s) => {
            let _ = write!(out, "{s}");
        }
        Expr::Func(f, arg) => {
            out.push_str(f.name());
            out.push('(');
            sum_level(arg, out);
            out.push(')');
        }
        Expr::Power(b, n) => {
            match b.as_ref() {
                Expr::Sym(_) | Expr::Func(..) => factor(b, out),
                Expr::Const(c) if !c.is_negative() => constant(c, out),
                other => {
                    out.push('(');
                    sum_level(other, out);
                    out.push(')');
                }
            }
            let _ = write!(out, "^{n}");
        }
        Expr::Sum(_) | Expr::Product(_) | Expr::Neg(_) => {
            out.push('(');
            sum_level(e, out);
            out.push(')');
        }
    }
}

fn constant(c: &Number, out: &mut String) {
    if c.is_negative() {
        let _ = write!(out, "({c})");
    } else {
        let _ = write!(out, "{c}");
    }
}
