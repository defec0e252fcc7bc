//! Self-checks of the automorphism package against known values.

use crate::autos::{validate_generator, AutoWord, Autos, GenName};
use crate::cover::{lifted_eval, CoverPoint};
use crate::qfield::{Mat2, ProjMat2};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name: name.to_string(), passed, detail }
}

fn word(s: &str) -> AutoWord {
    s.parse().expect("built-in word")
}

pub fn verify_autos(a: &Autos) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for g in [GenName::H, GenName::V] {
        let r = validate_generator(&a.surface, a.generator(g));
        out.push(check(&format!("generator {} is an affine automorphism", g.letter()), r.is_ok(), r.err().map_or("ok".into(), |e| e.to_string())));
    }
    for (w, m) in [("h", Mat2::new(1, 3, 0, 1)), ("v", Mat2::new(1, 0, 1, 1)), ("vHv", Mat2::new(2, 3, 1, 2))] {
        let d = a.derivative(&word(w));
        out.push(check(&format!("D({w}) = ±{m}"), d == ProjMat2(m), d.to_string()));
    }
    for (w, m) in [("h", Mat2::new(1, 1, 0, 1)), ("v", Mat2::new(1, 0, 1, 1)), ("vHv", Mat2::new(0, -1, 1, 0)), ("(vHv)^4", Mat2::IDENTITY)] {
        let (ok, detail) = match a.h1_action(&word(w)) {
            Ok(h) => (h == m, h.to_string()),
            Err(e) => (false, e.to_string()),
        };
        out.push(check(&format!("H1({w}) = {m}"), ok, detail));
    }
    for (w, swaps) in [("h", false), ("v", true)] {
        let (ok, detail) = match a.cone_point_permutation(&word(w)) {
            Ok(p) => {
                let moved: Vec<&(String, String)> = p.iter().filter(|(x, y)| x != y).collect();
                let ok = if swaps {
                    moved.len() == 2 && moved.iter().all(|(x, _)| x.starts_with('C')) && p.iter().any(|(x, y)| x == "AB" && y == "AB")
                } else {
                    moved.is_empty()
                };
                (ok, p.iter().map(|(x, y)| format!("{x}->{y}")).collect::<Vec<_>>().join(" "))
            }
            Err(e) => (false, e.to_string()),
        };
        let name = if swaps { "v swaps the pi points, fixes 4pi" } else { "h fixes every cone point" };
        out.push(check(name, ok, detail));
    }
    let g = word("vHv");
    let cycle = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 0)];
    let mut images = Vec::new();
    let mut ok = true;
    for p in cycle.windows(2) {
        match lifted_eval(a, &g, &CoverPoint::marked(p[0].0, p[0].1)) {
            Ok(img) => {
                ok &= img == CoverPoint::marked(p[1].0, p[1].1);
                images.push(img.to_string());
            }
            Err(e) => {
                ok = false;
                images.push(e.to_string());
            }
        }
    }
    out.push(check("lift of vHv cycles the four marked points", ok, images.join(" ")));
    out
}
