//! Line-oriented program text: one instruction per line, space-separated
//! fields, a `core <id> flops <n>` header and `#` comments.
//!
//! ```text
//! core 0 flops 2
//! ld tcdm 0x10000000 d=r0
//! fp fma f32 s d=r2 s=r0,r1,r1
//! st tcdm 0x10000004 s=r2
//! bar 0
//! end
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use super::{FpOpKind, Instr, InstrKind, Program, Reg, Region};
use crate::tpfloat::{DivSqrtOp, FpFormat};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

fn region_name(r: Region) -> &'static str {
    match r {
        Region::Tcdm => "tcdm",
        Region::L2 => "l2",
    }
}

pub fn dump_program(p: &Program) -> String {
    let mut out = format!("core {} flops {}\n", p.core_id, p.flops);
    for ins in &p.instrs {
        let head = match ins.kind {
            InstrKind::IntOp => "int".to_string(),
            InstrKind::Load { region, addr } => format!("ld {} {addr:#x}", region_name(region)),
            InstrKind::Store { region, addr } => format!("st {} {addr:#x}", region_name(region)),
            InstrKind::FpOp { op, fmt, vectorial } => {
                format!("fp {} {fmt} {}", op.name(), if vectorial { 'v' } else { 's' })
            }
            InstrKind::FpDivSqrt { op, fmt } => {
                let name = if op == DivSqrtOp::Div { "div" } else { "sqrt" };
                format!("divsqrt {name} {fmt}")
            }
            InstrKind::Barrier { id } => format!("bar {id}"),
            InstrKind::End => "end".to_string(),
        };
        out.push_str(&head);
        if let Some(d) = ins.dst {
            let _ = write!(out, " d={d}");
        }
        if !ins.srcs.is_empty() {
            let srcs: Vec<String> = ins.srcs.iter().map(Reg::to_string).collect();
            let _ = write!(out, " s={}", srcs.join(","));
        }
        out.push('\n');
    }
    out
}

fn parse_reg(s: &str) -> Option<Reg> {
    s.strip_prefix('r')?.parse().ok().map(Reg)
}

fn parse_num(s: &str) -> Option<u32> {
    match s.strip_prefix("0x") {
        Some(hex) => u32::from_str_radix(hex, 16).ok(),
        None => s.parse().ok(),
    }
}

fn parse_region(s: &str) -> Option<Region> {
    match s {
        "tcdm" => Some(Region::Tcdm),
        "l2" => Some(Region::L2),
        _ => None,
    }
}

/// Parse one program. Blank lines and `#` comments are ignored.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut header: Option<(usize, u64)> = None;
    let mut instrs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let err = |msg: &str| ParseError { line, msg: msg.to_string() };
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut positional = Vec::new();
        let mut dst = None;
        let mut srcs = Vec::new();
        for tok in body.split_whitespace() {
            if let Some(d) = tok.strip_prefix("d=") {
                dst = Some(parse_reg(d).ok_or_else(|| err("bad destination register"))?);
            } else if let Some(s) = tok.strip_prefix("s=") {
                for r in s.split(',') {
                    srcs.push(parse_reg(r).ok_or_else(|| err("bad source register"))?);
                }
            } else {
                positional.push(tok);
            }
        }
        let kind = match positional.as_slice() {
            ["core", id, "flops", flops] => {
                let id = id.parse().map_err(|_| err("bad core id"))?;
                let flops = flops.parse().map_err(|_| err("bad flop count"))?;
                header = Some((id, flops));
                continue;
            }
            ["int"] => InstrKind::IntOp,
            [op @ ("ld" | "st"), region, addr] => {
                let region = parse_region(region).ok_or_else(|| err("bad region"))?;
                let addr = parse_num(addr).ok_or_else(|| err("bad address"))?;
                if *op == "ld" {
                    InstrKind::Load { region, addr }
                } else {
                    InstrKind::Store { region, addr }
                }
            }
            ["fp", op, fmt, vec] => InstrKind::FpOp {
                op: FpOpKind::from_name(op).ok_or_else(|| err("unknown fp op"))?,
                fmt: fmt.parse::<FpFormat>().map_err(|e| err(&e))?,
                vectorial: match *vec {
                    "v" => true,
                    "s" => false,
                    _ => return Err(err("expected s or v")),
                },
            },
            ["divsqrt", op, fmt] => InstrKind::FpDivSqrt {
                op: match *op {
                    "div" => DivSqrtOp::Div,
                    "sqrt" => DivSqrtOp::Sqrt,
                    _ => return Err(err("expected div or sqrt")),
                },
                fmt: fmt.parse::<FpFormat>().map_err(|e| err(&e))?,
            },
            ["bar", id] => InstrKind::Barrier { id: id.parse().map_err(|_| err("bad barrier id"))? },
            ["end"] => InstrKind::End,
            _ => return Err(err("unrecognized instruction")),
        };
        instrs.push(Instr { kind, dst, srcs });
    }
    let (core_id, flops) = header.ok_or(ParseError { line: 0, msg: "missing core header".into() })?;
    Ok(Program { core_id, instrs, flops })
}
