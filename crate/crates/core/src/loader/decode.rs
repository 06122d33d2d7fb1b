//! Instruction stream decoding: the full opcode table, control-structure
//! matching, and label-depth validation.

use super::instr::{BlockType, Instr, MemArg};
use super::{ControlEntry, FunctionBody, LoaderError, Reader};
use std::collections::HashMap;

/// What opened a pending control scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Opener {
    /// The implicit scope covering the whole expression or function body.
    Body,
    Block(u32),
    Loop(u32),
    If(u32),
}

struct Walker {
    func: u32,
    instrs: Vec<Instr>,
    control: HashMap<u32, ControlEntry>,
    /// (opener, else offset if seen).
    stack: Vec<(Opener, Option<u32>)>,
}

impl Walker {
    fn new(func: u32) -> Self {
        Walker {
            func,
            instrs: Vec::new(),
            control: HashMap::new(),
            stack: vec![(Opener::Body, None)],
        }
    }

    fn check_depth(&self, depth: u32) -> Result<(), LoaderError> {
        if (depth as usize) >= self.stack.len() {
            return Err(LoaderError::BadLabelDepth {
                func: self.func,
                depth,
            });
        }
        Ok(())
    }

    /// Consumes instructions until the scope opened at construction closes.
    fn run(&mut self, r: &mut Reader) -> Result<(), LoaderError> {
        loop {
            if r.is_empty() {
                return Err(LoaderError::BadBlockNesting { func: self.func });
            }
            let offset = self.instrs.len() as u32;
            let instr = decode_one(r)?;
            match &instr {
                Instr::Block(_) => self.stack.push((Opener::Block(offset), None)),
                Instr::Loop(_) => self.stack.push((Opener::Loop(offset), None)),
                Instr::If(_) => self.stack.push((Opener::If(offset), None)),
                Instr::Else => {
                    match self.stack.last_mut() {
                        Some((Opener::If(_), else_slot @ None)) => *else_slot = Some(offset),
                        _ => return Err(LoaderError::BadBlockNesting { func: self.func }),
                    };
                }
                Instr::End => {
                    let (opener, else_offset) =
                        self.stack.pop().expect("stack holds at least the body scope");
                    match opener {
                        Opener::Body => {
                            self.instrs.push(instr);
                            return Ok(());
                        }
                        Opener::Block(at) | Opener::Loop(at) | Opener::If(at) => {
                            self.control.insert(
                                at,
                                ControlEntry {
                                    end: offset,
                                    else_: else_offset,
                                },
                            );
                            if let Some(else_at) = else_offset {
                                self.control.insert(
                                    else_at,
                                    ControlEntry {
                                        end: offset,
                                        else_: None,
                                    },
                                );
                            }
                        }
                    }
                }
                Instr::Br(d) | Instr::BrIf(d) => self.check_depth(*d)?,
                Instr::BrTable(targets, default) => {
                    for &d in targets {
                        self.check_depth(d)?;
                    }
                    self.check_depth(*default)?;
                }
                _ => {}
            }
            self.instrs.push(instr);
        }
    }
}

/// Decodes a standalone initializer expression up to and including its
/// terminal `end`.
pub(crate) fn decode_expr(r: &mut Reader) -> Result<Vec<Instr>, LoaderError> {
    let mut walker = Walker::new(u32::MAX);
    walker.run(r)?;
    Ok(walker.instrs)
}

/// Decodes a function body, which must consume the reader exactly.
pub(crate) fn decode_body(r: &mut Reader, func: u32) -> Result<FunctionBody, LoaderError> {
    let mut walker = Walker::new(func);
    walker.run(r)?;
    if !r.is_empty() {
        return Err(LoaderError::BadBlockNesting { func });
    }
    Ok(FunctionBody {
        instrs: walker.instrs,
        control: walker.control,
    })
}

fn block_type(r: &mut Reader) -> Result<BlockType, LoaderError> {
    let offset = r.offset();
    match r.u8()? {
        0x40 => Ok(BlockType::Empty),
        0x7F => Ok(BlockType::Value(super::ValType::I32)),
        0x7E => Ok(BlockType::Value(super::ValType::I64)),
        0x7D => Ok(BlockType::Value(super::ValType::F32)),
        0x7C => Ok(BlockType::Value(super::ValType::F64)),
        _ => Err(LoaderError::MalformedBody {
            offset,
            reason: "invalid block type",
        }),
    }
}

fn mem_arg(r: &mut Reader) -> Result<MemArg, LoaderError> {
    let align = r.u32_leb()?;
    let offset = r.u32_leb()?;
    Ok(MemArg { align, offset })
}

fn reserved_zero(r: &mut Reader) -> Result<(), LoaderError> {
    let offset = r.offset();
    if r.u8()? != 0x00 {
        return Err(LoaderError::MalformedBody {
            offset,
            reason: "reserved byte must be zero",
        });
    }
    Ok(())
}

fn decode_one(r: &mut Reader) -> Result<Instr, LoaderError> {
    use Instr::*;
    let offset = r.offset();
    let opcode = r.u8()?;
    let instr = match opcode {
        0x00 => Unreachable,
        0x01 => Nop,
        0x02 => Block(block_type(r)?),
        0x03 => Loop(block_type(r)?),
        0x04 => If(block_type(r)?),
        0x05 => Else,
        0x0B => End,
        0x0C => Br(r.u32_leb()?),
        0x0D => BrIf(r.u32_leb()?),
        0x0E => {
            let count = r.u32_leb()?;
            let mut targets = Vec::with_capacity(count as usize);
            for _ in 0..count {
                targets.push(r.u32_leb()?);
            }
            BrTable(targets, r.u32_leb()?)
        }
        0x0F => Return,
        0x10 => Call(r.u32_leb()?),
        0x11 => {
            let type_idx = r.u32_leb()?;
            reserved_zero(r)?;
            CallIndirect(type_idx)
        }
        0x1A => Drop,
        0x1B => Select,
        0x20 => LocalGet(r.u32_leb()?),
        0x21 => LocalSet(r.u32_leb()?),
        0x22 => LocalTee(r.u32_leb()?),
        0x23 => GlobalGet(r.u32_leb()?),
        0x24 => GlobalSet(r.u32_leb()?),
        0x28 => I32Load(mem_arg(r)?),
        0x29 => I64Load(mem_arg(r)?),
        0x2A => F32Load(mem_arg(r)?),
        0x2B => F64Load(mem_arg(r)?),
        0x2C => I32Load8S(mem_arg(r)?),
        0x2D => I32Load8U(mem_arg(r)?),
        0x2E => I32Load16S(mem_arg(r)?),
        0x2F => I32Load16U(mem_arg(r)?),
        0x30 => I64Load8S(mem_arg(r)?),
        0x31 => I64Load8U(mem_arg(r)?),
        0x32 => I64Load16S(mem_arg(r)?),
        0x33 => I64Load16U(mem_arg(r)?),
        0x34 => I64Load32S(mem_arg(r)?),
        0x35 => I64Load32U(mem_arg(r)?),
        0x36 => I32Store(mem_arg(r)?),
        0x37 => I64Store(mem_arg(r)?),
        0x38 => F32Store(mem_arg(r)?),
        0x39 => F64Store(mem_arg(r)?),
        0x3A => I32Store8(mem_arg(r)?),
        0x3B => I32Store16(mem_arg(r)?),
        0x3C => I64Store8(mem_arg(r)?),
        0x3D => I64Store16(mem_arg(r)?),
        0x3E => I64Store32(mem_arg(r)?),
        0x3F => {
            reserved_zero(r)?;
            MemorySize
        }
        0x40 => {
            reserved_zero(r)?;
            MemoryGrow
        }
        0x41 => I32Const(r.i32_leb()?),
        0x42 => I64Const(r.i64_leb()?),
        0x43 => F32Const(u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"))),
        0x44 => F64Const(u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"))),
        0x45 => I32Eqz,
        0x46 => I32Eq,
        0x47 => I32Ne,
        0x48 => I32LtS,
        0x49 => I32LtU,
        0x4A => I32GtS,
        0x4B => I32GtU,
        0x4C => I32LeS,
        0x4D => I32LeU,
        0x4E => I32GeS,
        0x4F => I32GeU,
        0x50 => I64Eqz,
        0x51 => I64Eq,
        0x52 => I64Ne,
        0x53 => I64LtS,
        0x54 => I64LtU,
        0x55 => I64GtS,
        0x56 => I64GtU,
        0x57 => I64LeS,
        0x58 => I64LeU,
        0x59 => I64GeS,
        0x5A => I64GeU,
        0x5B => F32Eq,
        0x5C => F32Ne,
        0x5D => F32Lt,
        0x5E => F32Gt,
        0x5F => F32Le,
        0x60 => F32Ge,
        0x61 => F64Eq,
        0x62 => F64Ne,
        0x63 => F64Lt,
        0x64 => F64Gt,
        0x65 => F64Le,
        0x66 => F64Ge,
        0x67 => I32Clz,
        0x68 => I32Ctz,
        0x69 => I32Popcnt,
        0x6A => I32Add,
        0x6B => I32Sub,
        0x6C => I32Mul,
        0x6D => I32DivS,
        0x6E => I32DivU,
        0x6F => I32RemS,
        0x70 => I32RemU,
        0x71 => I32And,
        0x72 => I32Or,
        0x73 => I32Xor,
        0x74 => I32Shl,
        0x75 => I32ShrS,
        0x76 => I32ShrU,
        0x77 => I32Rotl,
        0x78 => I32Rotr,
        0x79 => I64Clz,
        0x7A => I64Ctz,
        0x7B => I64Popcnt,
        0x7C => I64Add,
        0x7D => I64Sub,
        0x7E => I64Mul,
        0x7F => I64DivS,
        0x80 => I64DivU,
        0x81 => I64RemS,
        0x82 => I64RemU,
        0x83 => I64And,
        0x84 => I64Or,
        0x85 => I64Xor,
        0x86 => I64Shl,
        0x87 => I64ShrS,
        0x88 => I64ShrU,
        0x89 => I64Rotl,
        0x8A => I64Rotr,
        0x8B => F32Abs,
        0x8C => F32Neg,
        0x8D => F32Ceil,
        0x8E => F32Floor,
        0x8F => F32Trunc,
        0x90 => F32Nearest,
        0x91 => F32Sqrt,
        0x92 => F32Add,
        0x93 => F32Sub,
        0x94 => F32Mul,
        0x95 => F32Div,
        0x96 => F32Min,
        0x97 => F32Max,
        0x98 => F32Copysign,
        0x99 => F64Abs,
        0x9A => F64Neg,
        0x9B => F64Ceil,
        0x9C => F64Floor,
        0x9D => F64Trunc,
        0x9E => F64Nearest,
        0x9F => F64Sqrt,
        0xA0 => F64Add,
        0xA1 => F64Sub,
        0xA2 => F64Mul,
        0xA3 => F64Div,
        0xA4 => F64Min,
        0xA5 => F64Max,
        0xA6 => F64Copysign,
        0xA7 => I32WrapI64,
        0xA8 => I32TruncF32S,
        0xA9 => I32TruncF32U,
        0xAA => I32TruncF64S,
        0xAB => I32TruncF64U,
        0xAC => I64ExtendI32S,
        0xAD => I64ExtendI32U,
        0xAE => I64TruncF32S,
        0xAF => I64TruncF32U,
        0xB0 => I64TruncF64S,
        0xB1 => I64TruncF64U,
        0xB2 => F32ConvertI32S,
        0xB3 => F32ConvertI32U,
        0xB4 => F32ConvertI64S,
        0xB5 => F32ConvertI64U,
        0xB6 => F32DemoteF64,
        0xB7 => F64ConvertI32S,
        0xB8 => F64ConvertI32U,
        0xB9 => F64ConvertI64S,
        0xBA => F64ConvertI64U,
        0xBB => F64PromoteF32,
        0xBC => I32ReinterpretF32,
        0xBD => I64ReinterpretF64,
        0xBE => F32ReinterpretI32,
        0xBF => F64ReinterpretI64,
        opcode => return Err(LoaderError::UnknownOpcode { opcode, offset }),
    };
    Ok(instr)
}
