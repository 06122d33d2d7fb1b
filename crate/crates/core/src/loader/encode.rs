//! Re-encoding of decoded instruction streams, used to check
//! decode-encode-decode idempotence and occasionally to splice fixtures.

use super::instr::{BlockType, Instr, MemArg, ValType};
use super::leb128::{encode_signed, encode_unsigned};

fn val_type_byte(ty: ValType) -> u8 {
    match ty {
        ValType::I32 => 0x7F,
        ValType::I64 => 0x7E,
        ValType::F32 => 0x7D,
        ValType::F64 => 0x7C,
    }
}

fn push_block_type(bt: BlockType, out: &mut Vec<u8>) {
    match bt {
        BlockType::Empty => out.push(0x40),
        BlockType::Value(ty) => out.push(val_type_byte(ty)),
    }
}

fn push_u32(v: u32, out: &mut Vec<u8>) {
    encode_unsigned(v as u64, out);
}

fn push_mem_arg(m: MemArg, out: &mut Vec<u8>) {
    push_u32(m.align, out);
    push_u32(m.offset, out);
}

/// Encodes an instruction sequence in the Wasm 1.0 binary format.
pub fn encode_instrs(instrs: &[Instr], out: &mut Vec<u8>) {
    for instr in instrs {
        encode_one(instr, out);
    }
}

fn encode_one(instr: &Instr, out: &mut Vec<u8>) {
    use Instr::*;
    match instr {
        Unreachable => out.push(0x00),
        Nop => out.push(0x01),
        Block(bt) => {
            out.push(0x02);
            push_block_type(*bt, out);
        }
        Loop(bt) => {
            out.push(0x03);
            push_block_type(*bt, out);
        }
        If(bt) => {
            out.push(0x04);
            push_block_type(*bt, out);
        }
        Else => out.push(0x05),
        End => out.push(0x0B),
        Br(d) => {
            out.push(0x0C);
            push_u32(*d, out);
        }
        BrIf(d) => {
            out.push(0x0D);
            push_u32(*d, out);
        }
        BrTable(targets, default) => {
            out.push(0x0E);
            push_u32(targets.len() as u32, out);
            for &t in targets {
                push_u32(t, out);
            }
            push_u32(*default, out);
        }
        Return => out.push(0x0F),
        Call(f) => {
            out.push(0x10);
            push_u32(*f, out);
        }
        CallIndirect(t) => {
            out.push(0x11);
            push_u32(*t, out);
            out.push(0x00);
        }
        Drop => out.push(0x1A),
        Select => out.push(0x1B),
        LocalGet(i) => {
            out.push(0x20);
            push_u32(*i, out);
        }
        LocalSet(i) => {
            out.push(0x21);
            push_u32(*i, out);
        }
        LocalTee(i) => {
            out.push(0x22);
            push_u32(*i, out);
        }
        GlobalGet(i) => {
            out.push(0x23);
            push_u32(*i, out);
        }
        GlobalSet(i) => {
            out.push(0x24);
            push_u32(*i, out);
        }
        I32Load(m) => {
            out.push(0x28);
            push_mem_arg(*m, out);
        }
        I64Load(m) => {
            out.push(0x29);
            push_mem_arg(*m, out);
        }
        F32Load(m) => {
            out.push(0x2A);
            push_mem_arg(*m, out);
        }
        F64Load(m) => {
            out.push(0x2B);
            push_mem_arg(*m, out);
        }
        I32Load8S(m) => {
            out.push(0x2C);
            push_mem_arg(*m, out);
        }
        I32Load8U(m) => {
            out.push(0x2D);
            push_mem_arg(*m, out);
        }
        I32Load16S(m) => {
            out.push(0x2E);
            push_mem_arg(*m, out);
        }
        I32Load16U(m) => {
            out.push(0x2F);
            push_mem_arg(*m, out);
        }
        I64Load8S(m) => {
            out.push(0x30);
            push_mem_arg(*m, out);
        }
        I64Load8U(m) => {
            out.push(0x31);
            push_mem_arg(*m, out);
        }
        I64Load16S(m) => {
            out.push(0x32);
            push_mem_arg(*m, out);
        }
        I64Load16U(m) => {
            out.push(0x33);
            push_mem_arg(*m, out);
        }
        I64Load32S(m) => {
            out.push(0x34);
            push_mem_arg(*m, out);
        }
        I64Load32U(m) => {
            out.push(0x35);
            push_mem_arg(*m, out);
        }
        I32Store(m) => {
            out.push(0x36);
            push_mem_arg(*m, out);
        }
        I64Store(m) => {
            out.push(0x37);
            push_mem_arg(*m, out);
        }
        F32Store(m) => {
            out.push(0x38);
            push_mem_arg(*m, out);
        }
        F64Store(m) => {
            out.push(0x39);
            push_mem_arg(*m, out);
        }
        I32Store8(m) => {
            out.push(0x3A);
            push_mem_arg(*m, out);
        }
        I32Store16(m) => {
            out.push(0x3B);
            push_mem_arg(*m, out);
        }
        I64Store8(m) => {
            out.push(0x3C);
            push_mem_arg(*m, out);
        }
        I64Store16(m) => {
            out.push(0x3D);
            push_mem_arg(*m, out);
        }
        I64Store32(m) => {
            out.push(0x3E);
            push_mem_arg(*m, out);
        }
        MemorySize => {
            out.push(0x3F);
            out.push(0x00);
        }
        MemoryGrow => {
            out.push(0x40);
            out.push(0x00);
        }
        I32Const(v) => {
            out.push(0x41);
            encode_signed(*v as i64, out);
        }
        I64Const(v) => {
            out.push(0x42);
            encode_signed(*v, out);
        }
        F32Const(bits) => {
            out.push(0x43);
            out.extend_from_slice(&bits.to_le_bytes());
        }
        F64Const(bits) => {
            out.push(0x44);
            out.extend_from_slice(&bits.to_le_bytes());
        }
        simple => out.push(simple_opcode(simple)),
    }
}

/// Opcode bytes for the immediate-free instructions.
fn simple_opcode(instr: &Instr) -> u8 {
    use Instr::*;
    match instr {
        I32Eqz => 0x45,
        I32Eq => 0x46,
        I32Ne => 0x47,
        I32LtS => 0x48,
        I32LtU => 0x49,
        I32GtS => 0x4A,
        I32GtU => 0x4B,
        I32LeS => 0x4C,
        I32LeU => 0x4D,
        I32GeS => 0x4E,
        I32GeU => 0x4F,
        I64Eqz => 0x50,
        I64Eq => 0x51,
        I64Ne => 0x52,
        I64LtS => 0x53,
        I64LtU => 0x54,
        I64GtS => 0x55,
        I64GtU => 0x56,
        I64LeS => 0x57,
        I64LeU => 0x58,
        I64GeS => 0x59,
        I64GeU => 0x5A,
        F32Eq => 0x5B,
        F32Ne => 0x5C,
        F32Lt => 0x5D,
        F32Gt => 0x5E,
        F32Le => 0x5F,
        F32Ge => 0x60,
        F64Eq => 0x61,
        F64Ne => 0x62,
        F64Lt => 0x63,
        F64Gt => 0x64,
        F64Le => 0x65,
        F64Ge => 0x66,
        I32Clz => 0x67,
        I32Ctz => 0x68,
        I32Popcnt => 0x69,
        I32Add => 0x6A,
        I32Sub => 0x6B,
        I32Mul => 0x6C,
        I32DivS => 0x6D,
        I32DivU => 0x6E,
        I32RemS => 0x6F,
        I32RemU => 0x70,
        I32And => 0x71,
        I32Or => 0x72,
        I32Xor => 0x73,
        I32Shl => 0x74,
        I32ShrS => 0x75,
        I32ShrU => 0x76,
        I32Rotl => 0x77,
        I32Rotr => 0x78,
        I64Clz => 0x79,
        I64Ctz => 0x7A,
        I64Popcnt => 0x7B,
        I64Add => 0x7C,
        I64Sub => 0x7D,
        I64Mul => 0x7E,
        I64DivS => 0x7F,
        I64DivU => 0x80,
        I64RemS => 0x81,
        I64RemU => 0x82,
        I64And => 0x83,
        I64Or => 0x84,
        I64Xor => 0x85,
        I64Shl => 0x86,
        I64ShrS => 0x87,
        I64ShrU => 0x88,
        I64Rotl => 0x89,
        I64Rotr => 0x8A,
        F32Abs => 0x8B,
        F32Neg => 0x8C,
        F32Ceil => 0x8D,
        F32Floor => 0x8E,
        F32Trunc => 0x8F,
        F32Nearest => 0x90,
        F32Sqrt => 0x91,
        F32Add => 0x92,
        F32Sub => 0x93,
        F32Mul => 0x94,
        F32Div => 0x95,
        F32Min => 0x96,
        F32Max => 0x97,
        F32Copysign => 0x98,
        F64Abs => 0x99,
        F64Neg => 0x9A,
        F64Ceil => 0x9B,
        F64Floor => 0x9C,
        F64Trunc => 0x9D,
        F64Nearest => 0x9E,
        F64Sqrt => 0x9F,
        F64Add => 0xA0,
        F64Sub => 0xA1,
        F64Mul => 0xA2,
        F64Div => 0xA3,
        F64Min => 0xA4,
        F64Max => 0xA5,
        F64Copysign => 0xA6,
        I32WrapI64 => 0xA7,
        I32TruncF32S => 0xA8,
        I32TruncF32U => 0xA9,
        I32TruncF64S => 0xAA,
        I32TruncF64U => 0xAB,
        I64ExtendI32S => 0xAC,
        I64ExtendI32U => 0xAD,
        I64TruncF32S => 0xAE,
        I64TruncF32U => 0xAF,
        I64TruncF64S => 0xB0,
        I64TruncF64U => 0xB1,
        F32ConvertI32S => 0xB2,
        F32ConvertI32U => 0xB3,
        F32ConvertI64S => 0xB4,
        F32ConvertI64U => 0xB5,
        F32DemoteF64 => 0xB6,
        F64ConvertI32S => 0xB7,
        F64ConvertI32U => 0xB8,
        F64ConvertI64S => 0xB9,
        F64ConvertI64U => 0xBA,
        F64PromoteF32 => 0xBB,
        I32ReinterpretF32 => 0xBC,
        I64ReinterpretF64 => 0xBD,
        F32ReinterpretI32 => 0xBE,
        F64ReinterpretI64 => 0xBF,
        other => unreachable!("{other:?} carries immediates"),
    }
}
