//! Decoding of Wasm 1.0 binaries into an in-memory module representation.
//!
//! The decoder covers the complete 1.0 binary grammar: every section kind
//! and every assigned one-byte opcode. Custom sections are retained as
//! opaque blobs. Validation is structural (section ordering and sizes,
//! well-nested control, label depths, index ranges, the one-memory and
//! one-table limits), not a full type check of instruction sequences.

mod decode;
pub mod encode;
pub mod instr;
pub mod leb128;

pub use instr::{BlockType, FuncType, Instr, MemArg, ValType};
pub use leb128::VarintError;

use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoaderError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u32),
    #[error("malformed varint at byte {offset}: {kind}")]
    MalformedVarint { offset: usize, kind: VarintError },
    #[error("malformed section {section_id} at byte {offset}: {reason}")]
    MalformedSection {
        section_id: u8,
        offset: usize,
        reason: String,
    },
    #[error("unexpected end of input at byte {offset}")]
    UnexpectedEof { offset: usize },
    #[error("unknown opcode 0x{opcode:02x} at byte {offset}")]
    UnknownOpcode { opcode: u8, offset: usize },
    #[error("malformed instruction at byte {offset}: {reason}")]
    MalformedBody { offset: usize, reason: &'static str },
    #[error("unbalanced control structure in function {func}")]
    BadBlockNesting { func: u32 },
    #[error("branch depth {depth} out of range in function {func}")]
    BadLabelDepth { func: u32, depth: u32 },
    #[error("{count} code bodies for {declared} declared functions")]
    CountMismatch { count: usize, declared: usize },
    #[error("{kind} index {index} out of range")]
    IndexOutOfRange { kind: &'static str, index: u32 },
    #[error("at most one {0} is allowed")]
    TooMany(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub types: Vec<FuncType>,
    pub imports: Vec<Import>,
    /// Functions defined in this module; the function index space is
    /// imported functions first, then these.
    pub functions: Vec<Function>,
    pub tables: Vec<TableType>,
    pub memories: Vec<MemoryType>,
    pub globals: Vec<Global>,
    pub exports: Vec<Export>,
    pub start: Option<u32>,
    pub elements: Vec<ElementSegment>,
    pub data: Vec<DataSegment>,
    pub customs: Vec<CustomSection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Import {
    pub module: String,
    pub name: String,
    pub kind: ImportKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImportKind {
    Func(u32),
    Table(TableType),
    Memory(MemoryType),
    Global(GlobalType),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub type_idx: u32,
    /// Declared locals, expanded from the count-prefixed groups.
    pub locals: Vec<ValType>,
    pub body: FunctionBody,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionBody {
    pub instrs: Vec<Instr>,
    /// Matching offsets for every `block`/`loop`/`if` opener, plus an entry
    /// for each `else` giving the shared `end`.
    pub control: HashMap<u32, ControlEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlEntry {
    pub end: u32,
    pub else_: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableType {
    pub min: u32,
    pub max: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryType {
    pub min: u32,
    pub max: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlobalType {
    pub val: ValType,
    pub mutable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Global {
    pub ty: GlobalType,
    /// Initializer expression, terminal `end` included.
    pub init: Vec<Instr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExternalKind {
    Func,
    Table,
    Memory,
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Export {
    pub name: String,
    pub kind: ExternalKind,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementSegment {
    pub table: u32,
    pub offset: Vec<Instr>,
    pub funcs: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSegment {
    pub memory: u32,
    pub offset: Vec<Instr>,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomSection {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Module {
    pub fn num_imported_funcs(&self) -> u32 {
        self.imports
            .iter()
            .filter(|i| matches!(i.kind, ImportKind::Func(_)))
            .count() as u32
    }

    pub fn total_funcs(&self) -> u32 {
        self.num_imported_funcs() + self.functions.len() as u32
    }

    /// Resolves a function index to its type, covering imported and defined
    /// functions alike.
    pub fn func_type(&self, index: u32) -> Option<&FuncType> {
        let imported = self.num_imported_funcs();
        let type_idx = if index < imported {
            let mut seen = 0;
            let mut found = None;
            for import in &self.imports {
                if let ImportKind::Func(t) = import.kind {
                    if seen == index {
                        found = Some(t);
                        break;
                    }
                    seen += 1;
                }
            }
            found?
        } else {
            self.functions.get((index - imported) as usize)?.type_idx
        };
        self.types.get(type_idx as usize)
    }

    /// The imported function at `index` in the function index space, as
    /// (namespace, name), if `index` refers to an import.
    pub fn imported_func(&self, index: u32) -> Option<(&str, &str)> {
        let mut seen = 0;
        for import in &self.imports {
            if let ImportKind::Func(_) = import.kind {
                if seen == index {
                    return Some((&import.module, &import.name));
                }
                seen += 1;
            }
        }
        None
    }

    /// The defined function behind a function-space index, if any.
    pub fn defined_func(&self, index: u32) -> Option<&Function> {
        let imported = self.num_imported_funcs();
        if index < imported {
            return None;
        }
        self.functions.get((index - imported) as usize)
    }

    /// Looks up an exported function by name, returning its index in the
    /// function index space.
    pub fn export_lookup(&self, name: &str) -> Option<u32> {
        self.exports
            .iter()
            .find(|e| e.kind == ExternalKind::Func && e.name == name)
            .map(|e| e.index)
    }

    /// True if any function import lives in `namespace`.
    pub fn imports_namespace(&self, namespace: &str) -> bool {
        self.imports
            .iter()
            .any(|i| matches!(i.kind, ImportKind::Func(_)) && i.module == namespace)
    }

    /// True if the module imports function `namespace.name`.
    pub fn imports_func(&self, namespace: &str, name: &str) -> bool {
        self.imports.iter().any(|i| {
            matches!(i.kind, ImportKind::Func(_)) && i.module == namespace && i.name == name
        })
    }

    pub fn instruction_count(&self) -> usize {
        self.functions.iter().map(|f| f.body.instrs.len()).sum()
    }
}

/// Bounded cursor over the input with absolute offsets for error reporting.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], base: usize) -> Self {
        Reader {
            bytes,
            pos: 0,
            base,
        }
    }

    pub(crate) fn offset(&self) -> usize {
        self.base + self.pos
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    pub(crate) fn u8(&mut self) -> Result<u8, LoaderError> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or(LoaderError::UnexpectedEof {
                offset: self.offset(),
            })?;
        self.pos += 1;
        Ok(b)
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], LoaderError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(LoaderError::UnexpectedEof {
            offset: self.base + self.bytes.len(),
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    pub(crate) fn u32_leb(&mut self) -> Result<u32, LoaderError> {
        let offset = self.offset();
        let (v, n) = leb128::decode_unsigned(&self.bytes[self.pos..], 32)
            .map_err(|kind| LoaderError::MalformedVarint { offset, kind })?;
        self.pos += n;
        Ok(v as u32)
    }

    pub(crate) fn i32_leb(&mut self) -> Result<i32, LoaderError> {
        let offset = self.offset();
        let (v, n) = leb128::decode_signed(&self.bytes[self.pos..], 32)
            .map_err(|kind| LoaderError::MalformedVarint { offset, kind })?;
        self.pos += n;
        Ok(v as i32)
    }

    pub(crate) fn i64_leb(&mut self) -> Result<i64, LoaderError> {
        let offset = self.offset();
        let (v, n) = leb128::decode_signed(&self.bytes[self.pos..], 64)
            .map_err(|kind| LoaderError::MalformedVarint { offset, kind })?;
        self.pos += n;
        Ok(v)
    }

    fn name(&mut self, section_id: u8) -> Result<String, LoaderError> {
        let len = self.u32_leb()? as usize;
        let offset = self.offset();
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| LoaderError::MalformedSection {
            section_id,
            offset,
            reason: "name is not valid UTF-8".into(),
        })
    }

    pub(crate) fn val_type(&mut self) -> Result<ValType, LoaderError> {
        let offset = self.offset();
        match self.u8()? {
            0x7F => Ok(ValType::I32),
            0x7E => Ok(ValType::I64),
            0x7D => Ok(ValType::F32),
            0x7C => Ok(ValType::F64),
            _ => Err(LoaderError::MalformedBody {
                offset,
                reason: "invalid value type",
            }),
        }
    }

    fn limits(&mut self, section_id: u8) -> Result<(u32, Option<u32>), LoaderError> {
        let offset = self.offset();
        match self.u8()? {
            0x00 => Ok((self.u32_leb()?, None)),
            0x01 => {
                let min = self.u32_leb()?;
                let max = self.u32_leb()?;
                Ok((min, Some(max)))
            }
            _ => Err(LoaderError::MalformedSection {
                section_id,
                offset,
                reason: "invalid limits flag".into(),
            }),
        }
    }

    fn table_type(&mut self, section_id: u8) -> Result<TableType, LoaderError> {
        let offset = self.offset();
        if self.u8()? != 0x70 {
            return Err(LoaderError::MalformedSection {
                section_id,
                offset,
                reason: "table element type must be funcref".into(),
            });
        }
        let (min, max) = self.limits(section_id)?;
        Ok(TableType { min, max })
    }

    fn global_type(&mut self, section_id: u8) -> Result<GlobalType, LoaderError> {
        let val = self.val_type()?;
        let offset = self.offset();
        let mutable = match self.u8()? {
            0x00 => false,
            0x01 => true,
            _ => {
                return Err(LoaderError::MalformedSection {
                    section_id,
                    offset,
                    reason: "invalid global mutability flag".into(),
                })
            }
        };
        Ok(GlobalType { val, mutable })
    }
}

const MAGIC: [u8; 4] = [0x00, 0x61, 0x73, 0x6D];
const VERSION: u32 = 1;
const MAX_LOCALS: usize = 100_000;

/// Decodes a complete Wasm 1.0 binary.
pub fn decode_module(bytes: &[u8]) -> Result<Module, LoaderError> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(LoaderError::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(LoaderError::UnexpectedEof { offset: bytes.len() });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(LoaderError::BadVersion(version));
    }

    let mut module = Module {
        types: Vec::new(),
        imports: Vec::new(),
        functions: Vec::new(),
        tables: Vec::new(),
        memories: Vec::new(),
        globals: Vec::new(),
        exports: Vec::new(),
        start: None,
        elements: Vec::new(),
        data: Vec::new(),
        customs: Vec::new(),
    };
    let mut declared_func_types: Vec<u32> = Vec::new();
    let mut bodies: Vec<(Vec<ValType>, FunctionBody)> = Vec::new();

    let mut r = Reader::new(&bytes[8..], 8);
    let mut last_id = 0u8;
    while !r.is_empty() {
        let section_offset = r.offset();
        let id = r.u8()?;
        let size = r.u32_leb()? as usize;
        let payload_base = r.offset();
        let payload = r.take(size)?;
        if id != 0 {
            if id > 11 {
                return Err(LoaderError::MalformedSection {
                    section_id: id,
                    offset: section_offset,
                    reason: "unknown section id".into(),
                });
            }
            if id <= last_id {
                return Err(LoaderError::MalformedSection {
                    section_id: id,
                    offset: section_offset,
                    reason: "section out of order".into(),
                });
            }
            last_id = id;
        }
        let mut s = Reader::new(payload, payload_base);
        match id {
            0 => {
                let name = s.name(0)?;
                let rest = s.take(payload.len() - (s.offset() - payload_base))?;
                module.customs.push(CustomSection {
                    name,
                    bytes: rest.to_vec(),
                });
            }
            1 => decode_type_section(&mut s, &mut module)?,
            2 => decode_import_section(&mut s, &mut module)?,
            3 => {
                for _ in 0..s.u32_leb()? {
                    declared_func_types.push(s.u32_leb()?);
                }
            }
            4 => {
                for _ in 0..s.u32_leb()? {
                    let t = s.table_type(4)?;
                    module.tables.push(t);
                }
            }
            5 => {
                for _ in 0..s.u32_leb()? {
                    let (min, max) = s.limits(5)?;
                    module.memories.push(MemoryType { min, max });
                }
            }
            6 => {
                for _ in 0..s.u32_leb()? {
                    let ty = s.global_type(6)?;
                    let init = decode::decode_expr(&mut s)?;
                    module.globals.push(Global { ty, init });
                }
            }
            7 => {
                for _ in 0..s.u32_leb()? {
                    let name = s.name(7)?;
                    let offset = s.offset();
                    let kind = match s.u8()? {
                        0x00 => ExternalKind::Func,
                        0x01 => ExternalKind::Table,
                        0x02 => ExternalKind::Memory,
                        0x03 => ExternalKind::Global,
                        _ => {
                            return Err(LoaderError::MalformedSection {
                                section_id: 7,
                                offset,
                                reason: "invalid export kind".into(),
                            })
                        }
                    };
                    let index = s.u32_leb()?;
                    module.exports.push(Export { name, kind, index });
                }
            }
            8 => module.start = Some(s.u32_leb()?),
            9 => {
                for _ in 0..s.u32_leb()? {
                    let table = s.u32_leb()?;
                    let offset = decode::decode_expr(&mut s)?;
                    let mut funcs = Vec::new();
                    for _ in 0..s.u32_leb()? {
                        funcs.push(s.u32_leb()?);
                    }
                    module.elements.push(ElementSegment {
                        table,
                        offset,
                        funcs,
                    });
                }
            }
            10 => decode_code_section(&mut s, &mut bodies)?,
            11 => {
                for _ in 0..s.u32_leb()? {
                    let memory = s.u32_leb()?;
                    let offset = decode::decode_expr(&mut s)?;
                    let len = s.u32_leb()? as usize;
                    let bytes = s.take(len)?.to_vec();
                    module.data.push(DataSegment {
                        memory,
                        offset,
                        bytes,
                    });
                }
            }
            _ => unreachable!("id range checked above"),
        }
        if !s.is_empty() {
            return Err(LoaderError::MalformedSection {
                section_id: id,
                offset: s.offset(),
                reason: "section length mismatch".into(),
            });
        }
    }

    if bodies.len() != declared_func_types.len() {
        return Err(LoaderError::CountMismatch {
            count: bodies.len(),
            declared: declared_func_types.len(),
        });
    }
    for (type_idx, (locals, body)) in declared_func_types.into_iter().zip(bodies) {
        module.functions.push(Function {
            type_idx,
            locals,
            body,
        });
    }
    validate(&module)?;
    Ok(module)
}

fn decode_type_section(s: &mut Reader, module: &mut Module) -> Result<(), LoaderError> {
    for _ in 0..s.u32_leb()? {
        let offset = s.offset();
        if s.u8()? != 0x60 {
            return Err(LoaderError::MalformedSection {
                section_id: 1,
                offset,
                reason: "function type must start with 0x60".into(),
            });
        }
        let mut params = Vec::new();
        for _ in 0..s.u32_leb()? {
            params.push(s.val_type()?);
        }
        let result_offset = s.offset();
        let mut results = Vec::new();
        for _ in 0..s.u32_leb()? {
            results.push(s.val_type()?);
        }
        if results.len() > 1 {
            return Err(LoaderError::MalformedSection {
                section_id: 1,
                offset: result_offset,
                reason: "multi-value results are not part of Wasm 1.0".into(),
            });
        }
        module.types.push(FuncType { params, results });
    }
    Ok(())
}

fn decode_import_section(s: &mut Reader, module: &mut Module) -> Result<(), LoaderError> {
    for _ in 0..s.u32_leb()? {
        let mod_name = s.name(2)?;
        let name = s.name(2)?;
        let offset = s.offset();
        let kind = match s.u8()? {
            0x00 => ImportKind::Func(s.u32_leb()?),
            0x01 => ImportKind::Table(s.table_type(2)?),
            0x02 => {
                let (min, max) = s.limits(2)?;
                ImportKind::Memory(MemoryType { min, max })
            }
            0x03 => ImportKind::Global(s.global_type(2)?),
            _ => {
                return Err(LoaderError::MalformedSection {
                    section_id: 2,
                    offset,
                    reason: "invalid import kind".into(),
                })
            }
        };
        module.imports.push(Import {
            module: mod_name,
            name,
            kind,
        });
    }
    Ok(())
}

fn decode_code_section(
    s: &mut Reader,
    bodies: &mut Vec<(Vec<ValType>, FunctionBody)>,
) -> Result<(), LoaderError> {
    let count = s.u32_leb()?;
    for ordinal in 0..count {
        let body_size = s.u32_leb()? as usize;
        let body_base = s.offset();
        let body_bytes = s.take(body_size)?;
        let mut b = Reader::new(body_bytes, body_base);
        let mut locals = Vec::new();
        for _ in 0..b.u32_leb()? {
            let n = b.u32_leb()? as usize;
            let ty = b.val_type()?;
            if locals.len() + n > MAX_LOCALS {
                return Err(LoaderError::MalformedSection {
                    section_id: 10,
                    offset: b.offset(),
                    reason: "too many locals".into(),
                });
            }
            locals.extend(std::iter::repeat_n(ty, n));
        }
        let body = decode::decode_body(&mut b, ordinal)?;
        bodies.push((locals, body));
    }
    Ok(())
}

fn validate(module: &Module) -> Result<(), LoaderError> {
    let total_tables = module.tables.len()
        + module
            .imports
            .iter()
            .filter(|i| matches!(i.kind, ImportKind::Table(_)))
            .count();
    if total_tables > 1 {
        return Err(LoaderError::TooMany("table"));
    }
    let total_memories = module.memories.len()
        + module
            .imports
            .iter()
            .filter(|i| matches!(i.kind, ImportKind::Memory(_)))
            .count();
    if total_memories > 1 {
        return Err(LoaderError::TooMany("memory"));
    }

    let num_types = module.types.len() as u32;
    for import in &module.imports {
        if let ImportKind::Func(t) = import.kind {
            if t >= num_types {
                return Err(LoaderError::IndexOutOfRange {
                    kind: "type",
                    index: t,
                });
            }
        }
    }
    for f in &module.functions {
        if f.type_idx >= num_types {
            return Err(LoaderError::IndexOutOfRange {
                kind: "type",
                index: f.type_idx,
            });
        }
    }

    let total_funcs = module.total_funcs();
    let total_globals = module
        .imports
        .iter()
        .filter(|i| matches!(i.kind, ImportKind::Global(_)))
        .count() as u32
        + module.globals.len() as u32;
    for export in &module.exports {
        let (limit, kind) = match export.kind {
            ExternalKind::Func => (total_funcs, "function"),
            ExternalKind::Table => (total_tables as u32, "table"),
            ExternalKind::Memory => (total_memories as u32, "memory"),
            ExternalKind::Global => (total_globals, "global"),
        };
        if export.index >= limit {
            return Err(LoaderError::IndexOutOfRange {
                kind,
                index: export.index,
            });
        }
    }

    for segment in &module.elements {
        if segment.table as usize >= total_tables {
            return Err(LoaderError::IndexOutOfRange {
                kind: "table",
                index: segment.table,
            });
        }
        for &f in &segment.funcs {
            if f >= total_funcs {
                return Err(LoaderError::IndexOutOfRange {
                    kind: "function",
                    index: f,
                });
            }
        }
    }
    for segment in &module.data {
        if segment.memory as usize >= total_memories {
            return Err(LoaderError::IndexOutOfRange {
                kind: "memory",
                index: segment.memory,
            });
        }
    }
    if let Some(start) = module.start {
        if start >= total_funcs {
            return Err(LoaderError::IndexOutOfRange {
                kind: "function",
                index: start,
            });
        }
    }
    Ok(())
}

/// Convenience wrapper for the common export query.
pub fn export_lookup(module: &Module, name: &str) -> Option<u32> {
    module.export_lookup(name)
}

/// Decodes a bare instruction stream (a code-entry body including its
/// terminal `end`) into instructions plus the control-matching table.
pub fn decode_function_body(bytes: &[u8], func: u32) -> Result<FunctionBody, LoaderError> {
    let mut r = Reader::new(bytes, 0);
    decode::decode_body(&mut r, func)
}
