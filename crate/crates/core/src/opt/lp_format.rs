use std::fmt::Write;

use super::MilpProblem;

fn term(out: &mut String, coef: f64, name: &str, first: bool) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {name}", -coef);
    } else if first {
        let _ = write!(out, " {coef} {name}");
    } else {
        let _ = write!(out, " + {coef} {name}");
    }
}

/// Renders the model in CPLEX LP format.
pub fn write_lp(problem: &MilpProblem) -> String {
    let mut out = String::from("\\ fog allocation model\nMinimize\n obj:");
    let mut first = true;
    for v in problem.vars.iter().filter(|v| v.cost != 0.0) {
        term(&mut out, v.cost, &v.name, first);
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for c in &problem.constraints {
        let _ = write!(out, " {}:", c.name);
        for (i, &(v, coef)) in c.terms.iter().enumerate() {
            term(&mut out, coef, &problem.vars[v].name, i == 0);
        }
        let _ = writeln!(out, " {} {}", c.sense, c.rhs);
    }
    out.push_str("Bounds\n");
    for v in &problem.vars {
        let _ = writeln!(out, " 0 <= {} <= 1", v.name);
    }
    out.push_str("Binaries\n");
    for chunk in problem.vars.chunks(8) {
        let names: Vec<&str> = chunk.iter().map(|v| v.name.as_str()).collect();
        let _ = writeln!(out, " {}", names.join(" "));
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{default_catalog, make_scenario, Layout};
    use crate::opt::formulate;
    use crate::topology::{Architecture, Topology, TopologyOptions};

    #[test]
    fn sections_and_rows() {
        let layout = Layout { rooms: 1, users_per_room: 2, demanding_per_room: 1 };
        let s = make_scenario(10.0, &default_catalog(), layout).unwrap();
        let t = Topology::build(Architecture::PonBased, &s, &TopologyOptions::default()).unwrap();
        let p = formulate(&t, &s, Architecture::PonBased).unwrap();
        let lp = write_lp(&p);
        let order: Vec<usize> = ["Minimize", "Subject To", "Bounds", "Binaries", "End"]
            .iter()
            .map(|h| lp.find(&format!("{h}\n")).unwrap())
            .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
        assert!(lp.contains(" assign_d0: 1 x_d0_r1UD2 + 1 x_d0_r1RF"));
        assert!(lp.contains(" cap_r1RF: 10 x_d0_r1RF - 64 a_r1RF <= 0"));
        let rows = lp.lines().skip_while(|l| *l != "Subject To").skip(1).take_while(|l| *l != "Bounds").count();
        assert_eq!(rows, p.constraints.len());
    }
}
