use std::fmt::Write as _;

use super::{Effect, PddlDomain, PddlProblem};

/// Prints a domain: two-space indentation, one predicate per line, each
/// action as `:precondition (and ...)` followed by `:effect (and ...)`.
pub fn render_domain(d: &PddlDomain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", d.name);
    let _ = writeln!(out, "  (:requirements {})", d.requirements.join(" "));
    if !d.types.is_empty() {
        let _ = writeln!(out, "  (:types {})", d.types.join(" "));
    }
    out.push_str("  (:predicates\n");
    for p in &d.predicates {
        let _ = writeln!(out, "    ({p})");
    }
    out.push_str("  )\n");
    for a in &d.actions {
        let _ = writeln!(out, "  (:action {}", a.name);
        let _ = writeln!(out, "    :precondition {}", conjunction(&a.precondition));
        let _ = writeln!(out, "    :effect {}", effect(&a.effect));
        out.push_str("  )\n");
    }
    out.push_str(")\n");
    out
}

pub fn render_problem(p: &PddlProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {})", p.name);
    let _ = writeln!(out, "  (:domain {})", p.domain_name);
    if p.init.is_empty() {
        out.push_str("  (:init)\n");
    } else {
        out.push_str("  (:init\n");
        for atom in &p.init {
            let _ = writeln!(out, "    ({atom})");
        }
        out.push_str("  )\n");
    }
    let _ = writeln!(out, "  (:goal {})", conjunction(&p.goal));
    out.push_str(")\n");
    out
}

fn conjunction(atoms: &[String]) -> String {
    let mut s = String::from("(and");
    for a in atoms {
        let _ = write!(s, " ({a})");
    }
    s.push(')');
    s
}

fn effect(e: &Effect) -> String {
    let mut s = String::new();
    write_effect(e, &mut s);
    s
}

fn write_effect(e: &Effect, out: &mut String) {
    match e {
        Effect::Add(p) => {
            let _ = write!(out, "({p})");
        }
        Effect::Not(p) => {
            let _ = write!(out, "(not ({p}))");
        }
        Effect::And(es) | Effect::OneOf(es) => {
            out.push_str(if matches!(e, Effect::And(_)) { "(and" } else { "(oneof" });
            for child in es {
                out.push(' ');
                write_effect(child, out);
            }
            out.push(')');
        }
    }
}
