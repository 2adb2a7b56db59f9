//! Text formats for graphs and scripted register assignments.
//!
//! Graph files start with `n <count>` and list one hyperedge per line as
//! `edge v1 v2 ... vk [weight]`. Vertices are 1-based. A token made only of
//! ASCII digits is a vertex; a trailing token of any other shape (`1.5`,
//! `-2`, `3e-1`) is the weight, which defaults to 1. Integer weights
//! therefore need a decimal point: `edge 1 2 3.0`.
//!
//! Assignment files hold one register per line: `ideal`, `dev a1,...,an` or
//! `shift s1,...,sn`. In both formats blank lines and lines starting with
//! `#` are ignored.

use std::fmt::Write as _;

use gsverify_core::adversary::RegisterState;
use gsverify_core::graph::WeightedHypergraph;

use crate::{config_err, invalid, Result};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn is_vertex_token(tok: &str) -> bool {
    !tok.is_empty() && tok.bytes().all(|b| b.is_ascii_digit())
}

pub fn parse_graph(text: &str) -> Result<WeightedHypergraph> {
    let mut lines = content_lines(text);
    let n = match lines.next() {
        Some((_, line)) => match line.split_whitespace().collect::<Vec<_>>()[..] {
            ["n", count] => count
                .parse::<usize>()
                .map_err(|_| config_err(format!("graph header: bad vertex count {count:?}")))?,
            _ => return Err(config_err(format!("graph header must be `n <count>`, got {line:?}"))),
        },
        None => return Err(config_err("graph file is empty")),
    };
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for (lineno, line) in lines {
        let mut toks = line.split_whitespace();
        if toks.next() != Some("edge") {
            return Err(config_err(format!("graph line {lineno}: expected `edge ...`")));
        }
        let mut toks: Vec<&str> = toks.collect();
        let weight = match toks.last() {
            Some(last) if !is_vertex_token(last) => {
                let w = last
                    .parse::<f64>()
                    .map_err(|_| config_err(format!("graph line {lineno}: bad weight {last:?}")))?;
                toks.pop();
                w
            }
            _ => 1.0,
        };
        let edge = toks
            .iter()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| config_err(format!("graph line {lineno}: bad vertex {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        edges.push(edge);
        weights.push(weight);
    }
    WeightedHypergraph::new(n, edges, weights).map_err(invalid)
}

pub fn render_graph(g: &WeightedHypergraph) -> String {
    let mut out = format!("n {}\n", g.n());
    for (edge, &w) in g.edges().iter().zip(g.weights()) {
        out.push_str("edge");
        for v in edge {
            write!(out, " {v}").unwrap();
        }
        if w != 1.0 {
            // Debug formatting keeps the decimal point on integral values.
            write!(out, " {w:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// `path(9)`, `cycle(5)`, `complete(4)` or `cluster2d(3,3)`. A bare family
/// name takes its size from `n`; `cluster2d` always needs both dimensions.
pub fn parse_preset(spec: &str, n: usize) -> Result<WeightedHypergraph> {
    let spec = spec.trim();
    let (name, args) = match spec.split_once('(') {
        Some((name, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| config_err(format!("preset {spec:?}: missing `)`")))?;
            let args = inner
                .split(',')
                .map(|a| {
                    a.trim()
                        .parse::<usize>()
                        .map_err(|_| config_err(format!("preset {spec:?}: bad size {a:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            (name.trim(), args)
        }
        None => (spec, vec![n]),
    };
    let g = match (name, &args[..]) {
        ("path", &[k]) => WeightedHypergraph::path(k),
        ("cycle", &[k]) => WeightedHypergraph::cycle(k),
        ("complete", &[k]) => WeightedHypergraph::complete(k),
        ("cluster2d", &[r, c]) => WeightedHypergraph::cluster2d(r, c),
        _ => return Err(config_err(format!("unknown graph preset {spec:?}"))),
    };
    g.map_err(invalid)
}

fn parse_list<T: std::str::FromStr>(body: &str, lineno: usize, what: &str) -> Result<Vec<T>> {
    body.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| config_err(format!("assignment line {lineno}: bad {what} {t:?}")))
        })
        .collect()
}

/// Register states in file order. Lengths and ranges are checked later
/// against the protocol parameters.
pub fn parse_assignment(text: &str) -> Result<Vec<RegisterState>> {
    content_lines(text)
        .map(|(lineno, line)| {
            let (head, body) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            match head {
                "ideal" if body.trim().is_empty() => Ok(RegisterState::Ideal),
                "dev" => Ok(RegisterState::Deviated(parse_list::<u32>(body, lineno, "deviation")?.into())),
                "shift" => Ok(RegisterState::Shifted(parse_list::<f64>(body, lineno, "shift")?.into())),
                _ => Err(config_err(format!("assignment line {lineno}: expected ideal, dev or shift"))),
            }
        })
        .collect()
}

/// Inverse of [`parse_assignment`] for the three states the format covers.
pub fn render_assignment(states: &[RegisterState]) -> Result<String> {
    let mut out = String::new();
    for s in states {
        match s {
            RegisterState::Ideal => out.push_str("ideal"),
            RegisterState::Deviated(a) => {
                let parts: Vec<String> = a.iter().map(u32::to_string).collect();
                write!(out, "dev {}", parts.join(",")).unwrap();
            }
            RegisterState::Shifted(v) => {
                let parts: Vec<String> = v.iter().map(f64::to_string).collect();
                write!(out, "shift {}", parts.join(",")).unwrap();
            }
            _ => return Err(config_err("only ideal, dev and shift registers have a text form")),
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_and_vertices() {
        let g = parse_graph("# square\nn 4\nedge 1 2\nedge 2 3 -0.5\nedge 1 2 3 4 2.0\n").unwrap();
        assert_eq!(g.edges(), &[vec![1, 2], vec![2, 3], vec![1, 2, 3, 4]]);
        assert_eq!(g.weights(), &[1.0, -0.5, 2.0]);
        assert_eq!(parse_graph(&render_graph(&g)).unwrap(), g);
    }

    #[test]
    fn graph_errors() {
        assert!(parse_graph("").is_err());
        assert!(parse_graph("nodes 3\n").is_err());
        assert!(parse_graph("n 3\nedge 1 4\n").is_err());
        assert!(parse_graph("n 3\nvertex 1\n").is_err());
        assert!(parse_graph("n 3\nedge 1 x 2\n").is_err());
    }

    #[test]
    fn presets() {
        assert_eq!(parse_preset("path", 4).unwrap(), WeightedHypergraph::path(4).unwrap());
        assert_eq!(parse_preset("cycle(5)", 9).unwrap(), WeightedHypergraph::cycle(5).unwrap());
        assert_eq!(parse_preset("cluster2d(2, 3)", 0).unwrap().n(), 6);
        assert!(parse_preset("cluster2d", 9).is_err());
        assert!(parse_preset("ring(3)", 3).is_err());
        assert!(parse_preset("path(3", 3).is_err());
    }

    #[test]
    fn assignment_lines() {
        let states = parse_assignment("ideal\n\ndev 1,0,2\nshift 0.5, -1e-3\n").unwrap();
        assert_eq!(states.len(), 3);
        assert_eq!(states[1], RegisterState::Deviated(vec![1, 0, 2].into()));
        assert_eq!(states[2], RegisterState::Shifted(vec![0.5, -1e-3].into()));
        assert_eq!(parse_assignment(&render_assignment(&states).unwrap()).unwrap(), states);
        assert!(parse_assignment("ideal 1\n").is_err());
        assert!(parse_assignment("dev 1,-1\n").is_err());
        assert!(parse_assignment("mixed\n").is_err());
    }
}
