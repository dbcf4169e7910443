//! Assembles the conformance fixtures with rbpf and records the r0 its
//! interpreter returns for each one.
//!
//! usage: sbpf-reference <fixture dir>
//!
//! Writes <name>.bpf next to every <name>.asm, plus expected.txt
//! (`<name> <r0 hex>`) and disasm.txt.

use std::fs;
use std::io::Write;
use std::path::Path;

fn main() {
    let dir = std::env::args().nth(1).expect("usage: sbpf-reference <fixture dir>");
    let dir = Path::new(&dir);

    let mut names: Vec<String> = fs::read_dir(dir)
        .expect("read fixture dir")
        .filter_map(|e| {
            let p = e.ok()?.path();
            (p.extension()? == "asm").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();

    let mut expected = fs::File::create(dir.join("expected.txt")).expect("create expected.txt");
    for name in &names {
        let src = fs::read_to_string(dir.join(format!("{name}.asm"))).expect("read asm");
        let prog = rbpf::assembler::assemble(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
        fs::write(dir.join(format!("{name}.bpf")), &prog).expect("write bpf");
        let vm = rbpf::EbpfVmNoData::new(Some(&prog)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let r0 = vm.execute_program().unwrap_or_else(|e| panic!("{name}: {e}"));
        writeln!(expected, "{name} {r0:#x}").unwrap();
    }

    let samples: [(&str, [u8; 8]); 2] = [
        ("mov_imm", [0xb7, 0x01, 0x00, 0x00, 0x2a, 0x00, 0x00, 0x00]),
        ("exit", [0x95, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00]),
    ];
    let mut disasm = fs::File::create(dir.join("disasm.txt")).expect("create disasm.txt");
    for (name, bytes) in samples {
        for insn in rbpf::disassembler::to_insn_vec(&bytes) {
            writeln!(disasm, "{name}\t{}", insn.desc).unwrap();
        }
    }
}
