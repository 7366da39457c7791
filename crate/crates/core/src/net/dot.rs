use std::fmt::Write;

use super::{Marking, PetriNet};

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// GraphViz rendering of `net` at `marking` (the initial marking if `None`).
/// Transitions are boxes labelled `(label, position)`, places are circles
/// whose tokens are drawn as filled dots. Output depends only on the net.
pub fn export_dot(net: &PetriNet, marking: Option<&Marking>) -> String {
    let m = marking.unwrap_or(&net.initial);
    let mut s = String::from("digraph occurrence_net {\n  rankdir=TB;\n");
    for (i, t) in net.transitions.iter().enumerate() {
        let _ = writeln!(
            s,
            "  t{i} [shape=box, label=\"({}, {})\"];",
            escape(&t.label),
            t.position
        );
    }
    for (i, p) in net.places.iter().enumerate() {
        let tokens = m.get(i).copied().unwrap_or(0);
        let mark = match tokens {
            0 => String::new(),
            1 => "&#9679;".to_string(),
            n => n.to_string(),
        };
        let _ = writeln!(
            s,
            "  p{i} [shape=circle, label=<{mark}>, xlabel=\"{}\"];",
            escape(&p.label(&net.transitions))
        );
    }
    for t in 0..net.transitions.len() {
        let mut pre = net.pre[t].clone();
        pre.sort();
        for (p, w) in pre {
            let _ = writeln!(s, "  p{p} -> t{t}{};", weight(w));
        }
        let mut post = net.post[t].clone();
        post.sort();
        for (p, w) in post {
            let _ = writeln!(s, "  t{t} -> p{p}{};", weight(w));
        }
    }
    s.push_str("}\n");
    s
}

fn weight(w: u32) -> String {
    if w == 1 {
        String::new()
    } else {
        format!(" [label=\"{w}\"]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::build_net;
    use crate::swap::SwapRelation;

    #[test]
    fn empty_net_is_an_empty_digraph() {
        let n = build_net(&[], &SwapRelation::empty(0), 8).unwrap();
        assert_eq!(export_dot(&n, None), "digraph occurrence_net {\n  rankdir=TB;\n}\n");
    }

    #[test]
    fn three_transaction_net() {
        let rel = SwapRelation::from_fn(3, |i, j| (i, j) != (0, 2));
        let n = build_net(&["F".into(), "H".into(), "G".into()], &rel, 8).unwrap();
        let dot = export_dot(&n, None);
        assert_eq!(dot.matches("shape=box").count(), 3);
        assert_eq!(dot.matches("shape=circle").count(), 7);
        assert_eq!(dot.matches("&#9679;").count(), 3);
        assert_eq!(dot.matches(" -> ").count(), 8);
        assert!(dot.contains("label=\"(F, 1)\""));
        assert!(dot.contains("xlabel=\"(t1,t3)\""));
        assert_eq!(dot, export_dot(&n.clone(), None));
    }
}
