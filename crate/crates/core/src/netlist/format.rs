// SPDX-License-Identifier: Apache-2.0

//! JSON interchange format.
//!
//! ```json
//! {
//!   "clock_period": 1e-9,
//!   "luts": [{"slew_axis": [0.0], "load_axis": [0.0], "table": [[1e-11]]}],
//!   "pins": [{"name": "in", "is_endpoint": false, "arrival": [0, 0, 0, 0]},
//!            {"name": "u1/A", "is_endpoint": false}, ...],
//!   "cells": [{"name": "u1", "arcs": [{"from": "u1/A", "to": "u1/Y",
//!                                      "delay_lut": 0, "slew_lut": 0}]}],
//!   "nets": [{"root": "u1/Y", "root_cap": [0, 0, 0, 0],
//!             "members": [{"pin": "out", "parent": "u1/Y",
//!                          "res": [10, 10, 10, 10], "cap": [1e-15, 1e-15, 1e-15, 1e-15]}]}]
//! }
//! ```
//!
//! Pins are referenced by name. A LUT reference is an index into `luts`, four
//! indices (one per condition), an inline table, or four inline tables.
//! Vectors of four numbers follow the canonical condition order. Optional pin
//! fields: `required` (endpoint requirement), `arrival` (marks a primary
//! input), `slew` (input transition, default zero).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{
    validate, CellRef, CornerVector, Design, Lut2D, LutRef, NetMember, NetTopology, Pin, PinRef,
    Violation,
};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid design: {}", summarize(.violations))]
    Semantic { violations: Vec<Violation> },
}

fn summarize(violations: &[Violation]) -> String {
    let mut parts: Vec<String> = violations.iter().take(5).map(|v| v.to_string()).collect();
    if violations.len() > 5 {
        parts.push(format!("and {} more", violations.len() - 5));
    }
    parts.join("; ")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocDesign {
    clock_period: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    luts: Vec<Lut2D>,
    pins: Vec<DocPin>,
    #[serde(default)]
    cells: Vec<DocCell>,
    #[serde(default)]
    nets: Vec<DocNet>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocPin {
    name: String,
    #[serde(default)]
    is_endpoint: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    required: Option<CornerVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arrival: Option<CornerVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slew: Option<CornerVector>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocCell {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    arcs: Vec<DocArc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocArc {
    from: String,
    to: String,
    delay_lut: LutSpec,
    slew_lut: LutSpec,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LutSpec {
    Index(u32),
    PerCondition([u32; 4]),
    Inline(Lut2D),
    InlinePerCondition(Box<[Lut2D; 4]>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocNet {
    root: String,
    #[serde(default)]
    root_cap: CornerVector,
    members: Vec<DocMember>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocMember {
    pin: String,
    parent: String,
    res: CornerVector,
    cap: CornerVector,
}

/// Parses and validates a design.
pub fn parse_design(text: &str) -> Result<Design, FormatError> {
    let design = parse_design_unvalidated(text)?;
    let violations = validate(&design);
    if violations.is_empty() {
        Ok(design)
    } else {
        Err(FormatError::Semantic { violations })
    }
}

/// Parses a design, resolving names but skipping structural validation.
/// Unknown names are still reported since they cannot be represented.
pub fn parse_design_unvalidated(text: &str) -> Result<Design, FormatError> {
    let doc: DocDesign = serde_json::from_str(text).map_err(|e| FormatError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    build(doc)
}

fn build(doc: DocDesign) -> Result<Design, FormatError> {
    let mut violations = Vec::new();
    let mut design = Design::empty(doc.clock_period);
    design.luts = doc.luts;
    let mut by_name: HashMap<String, PinRef> = HashMap::with_capacity(doc.pins.len());
    for p in doc.pins {
        let pin = design.add_pin(Pin {
            name: p.name.clone(),
            is_endpoint: p.is_endpoint,
            required: p.required,
            arrival: p.arrival,
            slew: p.slew,
        });
        if by_name.insert(p.name.clone(), pin).is_some() {
            violations.push(Violation::DuplicatePinName { name: p.name });
        }
    }
    let resolve = |name: &str, context: &str, violations: &mut Vec<Violation>| {
        by_name.get(name).copied().unwrap_or_else(|| {
            violations.push(Violation::DanglingReference {
                context: format!("{context} references unknown pin '{name}'"),
            });
            PinRef(u32::MAX)
        })
    };
    for (c, cell) in doc.cells.into_iter().enumerate() {
        let cell_ref: CellRef = design.add_cell(cell.name.unwrap_or_else(|| format!("cell{c}")));
        for arc in cell.arcs {
            let from = resolve(&arc.from, "arc", &mut violations);
            let to = resolve(&arc.to, "arc", &mut violations);
            let delay = intern(&mut design.luts, arc.delay_lut);
            let slew = intern(&mut design.luts, arc.slew_lut);
            design.add_arc(cell_ref, from, to, delay, slew);
        }
    }
    for net in doc.nets {
        let root = resolve(&net.root, "net root", &mut violations);
        let members = net
            .members
            .into_iter()
            .map(|m| NetMember {
                pin: resolve(&m.pin, "net member", &mut violations),
                parent: resolve(&m.parent, "net member parent", &mut violations),
                res: m.res,
                cap: m.cap,
            })
            .collect();
        design.add_net(NetTopology {
            root,
            root_cap: net.root_cap,
            members,
        });
    }
    if violations.is_empty() {
        Ok(design)
    } else {
        Err(FormatError::Semantic { violations })
    }
}

fn intern(luts: &mut Vec<Lut2D>, spec: LutSpec) -> [LutRef; 4] {
    let mut push = |lut: Lut2D| {
        luts.push(lut);
        LutRef::new(luts.len() - 1)
    };
    match spec {
        LutSpec::Index(i) => [LutRef(i); 4],
        LutSpec::PerCondition(ix) => ix.map(LutRef),
        LutSpec::Inline(lut) => [push(lut); 4],
        LutSpec::InlinePerCondition(tables) => (*tables).map(&mut push),
    }
}

fn lut_spec(refs: [LutRef; 4]) -> LutSpec {
    if refs.iter().all(|r| *r == refs[0]) {
        LutSpec::Index(refs[0].0)
    } else {
        LutSpec::PerCondition(refs.map(|r| r.0))
    }
}

/// Serializes a design as compact JSON. Arcs are written grouped by cell.
pub fn serialize_design(design: &Design) -> String {
    let name = |p: PinRef| design.pin(p).name.clone();
    let doc = DocDesign {
        clock_period: design.clock_period,
        luts: design.luts.clone(),
        pins: design
            .pins
            .iter()
            .map(|p| DocPin {
                name: p.name.clone(),
                is_endpoint: p.is_endpoint,
                required: p.required,
                arrival: p.arrival,
                slew: p.slew,
            })
            .collect(),
        cells: design
            .cells
            .iter()
            .map(|c| DocCell {
                name: Some(c.name.clone()),
                arcs: c
                    .arcs
                    .iter()
                    .map(|&a| {
                        let arc = design.arc(a);
                        DocArc {
                            from: name(arc.from),
                            to: name(arc.to),
                            delay_lut: lut_spec(arc.delay_lut),
                            slew_lut: lut_spec(arc.slew_lut),
                        }
                    })
                    .collect(),
            })
            .collect(),
        nets: design
            .nets
            .iter()
            .map(|n| DocNet {
                root: name(n.root),
                root_cap: n.root_cap,
                members: n
                    .members
                    .iter()
                    .map(|m| DocMember {
                        pin: name(m.pin),
                        parent: name(m.parent),
                        res: m.res,
                        cap: m.cap,
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("design serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "clock_period": 1e-9,
        "pins": [
            {"name": "drv", "arrival": [0, 0, 0, 0]},
            {"name": "snk", "is_endpoint": true}
        ],
        "nets": [
            {"root": "drv", "members": [
                {"pin": "snk", "parent": "drv", "res": [10, 10, 10, 10], "cap": [1e-15, 1e-15, 1e-15, 1e-15]}
            ]}
        ]
    }"#;

    #[test]
    fn minimal_document() {
        let d = parse_design(MINIMAL).unwrap();
        assert_eq!(d.pins.len(), 2);
        assert_eq!(d.nets.len(), 1);
        assert!(d.pins[1].is_endpoint);
        assert_eq!(parse_design(&serialize_design(&d)).unwrap(), d);
    }

    #[test]
    fn later_parent_is_semantic_error() {
        let text = r#"{
            "clock_period": 1e-9,
            "pins": [{"name": "a", "arrival": [0,0,0,0]}, {"name": "b"}, {"name": "c"}],
            "nets": [{"root": "a", "members": [
                {"pin": "b", "parent": "c", "res": [1,1,1,1], "cap": [1,1,1,1]},
                {"pin": "c", "parent": "a", "res": [1,1,1,1], "cap": [1,1,1,1]}
            ]}]
        }"#;
        let err = parse_design(text).unwrap_err();
        assert!(matches!(err, FormatError::Semantic { .. }));
        assert!(err.to_string().contains("net not in topological order"), "{err}");
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_design("{\n  \"clock_period\": ,\n}").unwrap_err();
        match err {
            FormatError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_pin_is_dangling() {
        let text = r#"{"clock_period": 1, "pins": [{"name": "a", "arrival": [0,0,0,0]}],
            "nets": [{"root": "a", "members": [{"pin": "zz", "parent": "a", "res": [1,1,1,1], "cap": [1,1,1,1]}]}]}"#;
        match parse_design(text).unwrap_err() {
            FormatError::Semantic { violations } => {
                assert!(matches!(violations[0], Violation::DanglingReference { .. }))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inline_luts_are_interned() {
        let text = r#"{"clock_period": 1,
            "pins": [{"name": "i", "arrival": [0,0,0,0]}, {"name": "a"}, {"name": "y"}, {"name": "o", "is_endpoint": true}],
            "cells": [{"arcs": [{"from": "a", "to": "y",
                "delay_lut": {"slew_axis": [0], "load_axis": [0], "table": [[2]]},
                "slew_lut": [{"slew_axis": [0], "load_axis": [0], "table": [[1]]},
                             {"slew_axis": [0], "load_axis": [0], "table": [[1]]},
                             {"slew_axis": [0], "load_axis": [0], "table": [[3]]},
                             {"slew_axis": [0], "load_axis": [0], "table": [[3]]}]}]}],
            "nets": [
                {"root": "i", "members": [{"pin": "a", "parent": "i", "res": [1,1,1,1], "cap": [1,1,1,1]}]},
                {"root": "y", "members": [{"pin": "o", "parent": "y", "res": [1,1,1,1], "cap": [1,1,1,1]}]}
            ]}"#;
        let d = parse_design(text).unwrap();
        assert_eq!(d.luts.len(), 5);
        assert_eq!(d.arcs[0].delay_lut, [LutRef(0); 4]);
        assert_eq!(d.arcs[0].slew_lut.map(|l| l.0), [1, 2, 3, 4]);
        assert_eq!(d.cells[0].name, "cell0");
        assert_eq!(parse_design(&serialize_design(&d)).unwrap(), d);
    }
}
