use super::*;
use crate::toy::{programs, toy_constants};
use rand::SeedableRng;

fn run_with(src: &str, bytes: &[u8]) -> Result<String, GenError> {
    let prog = parse(src)?;
    let mut s = Session::new(&prog, &toy_constants(), Limits::default())?;
    let out = s.generate(ChoiceSource::Bytes(ByteChoiceStream::new(bytes.to_vec())))?;
    Ok(String::from_utf8(out).unwrap())
}

fn eval_expr(expr: &str) -> Result<String, GenError> {
    run_with(&format!("def gen():\n    return str({expr})\n"), &[0])
}

#[test]
fn arithmetic_follows_python() {
    assert_eq!(eval_expr("7 // 2").unwrap(), "3");
    assert_eq!(eval_expr("-7 // 2").unwrap(), "-4");
    assert_eq!(eval_expr("-7 % 3").unwrap(), "2");
    assert_eq!(eval_expr("7 % -3").unwrap(), "-2");
    assert_eq!(eval_expr("2 ** 10").unwrap(), "1024");
    assert_eq!(eval_expr("1 + 2 * 3 - 4").unwrap(), "3");
    assert_eq!(eval_expr("-2 ** 2").unwrap(), "-4");
    assert_eq!(eval_expr("True + 1").unwrap(), "2");
    assert_eq!(eval_expr("'ab' * 3").unwrap(), "ababab");
    assert_eq!(eval_expr("[1, 2] + [3]").unwrap(), "[1, 2, 3]");
    assert_eq!(eval_expr("1 < 2 < 3").unwrap(), "True");
    assert_eq!(eval_expr("3 > 2 > 2").unwrap(), "False");
    assert_eq!(eval_expr("'b' in 'abc'").unwrap(), "True");
    assert_eq!(eval_expr("4 not in range(0, 10, 2)").unwrap(), "False");
    assert_eq!(eval_expr("0 or 'x'").unwrap(), "x");
    assert_eq!(eval_expr("1 and 0").unwrap(), "0");
    assert_eq!(eval_expr("'y' if 0 else 'n'").unwrap(), "n");
    assert_eq!(eval_expr("None is None").unwrap(), "True");
}

#[test]
fn strings_lists_and_builtins() {
    assert_eq!(eval_expr("'abcdef'[1:3]").unwrap(), "bc");
    assert_eq!(eval_expr("'abcdef'[-2:]").unwrap(), "ef");
    assert_eq!(eval_expr("'abc'[-1]").unwrap(), "c");
    assert_eq!(eval_expr("','.join(['a', 'b'])").unwrap(), "a,b");
    assert_eq!(eval_expr("' x '.strip().upper()").unwrap(), "X");
    assert_eq!(eval_expr("len('héllo')").unwrap(), "5");
    assert_eq!(eval_expr("chr(65) + str(ord('a'))").unwrap(), "A97");
    assert_eq!(eval_expr("max(3, 9, 4) - min([5, 2])").unwrap(), "7");
    assert_eq!(eval_expr("[x * 2 for x in range(4) if x != 2]").unwrap(), "[0, 2, 6]");
    assert_eq!(eval_expr("''.join(str(i) for i in range(3))").unwrap(), "012");
    assert_eq!(eval_expr("int(' 42 ') + abs(-1)").unwrap(), "43");
    assert_eq!(eval_expr("sum(range(5))").unwrap(), "10");
    assert_eq!(eval_expr("'a-b-c'.split('-')").unwrap(), "['a', 'b', 'c']");
}

#[test]
fn control_flow_and_functions() {
    let src = r#"
def helper(n, acc=0):
    if n == 0:
        return acc
    return helper(n - 1, acc + n)

def gen_numbers(rng, output):
    total = 0
    i = 0
    while True:
        i += 1
        if i % 2 == 0:
            continue
        if i > 9:
            break
        total += i
    for a, b in [(1, 2), (3, 4)]:
        total += a * b
    output.write(str(total) + ":" + str(helper(4)))
"#;
    assert_eq!(run_with(src, &[0]).unwrap(), "39:10");
}

#[test]
fn globals_and_module_state() {
    let src = r#"
COUNT = 0
ALPHABET = "xyz"

def bump():
    global COUNT
    COUNT += 1
    return COUNT

def gen_x(rng):
    bump()
    return ALPHABET[bump() % 3]
"#;
    let prog = parse(src).unwrap();
    let mut s = Session::new(&prog, &BTreeMap::new(), Limits::default()).unwrap();
    let a = s.generate(ChoiceSource::Bytes(ByteChoiceStream::new(vec![0]))).unwrap();
    let b = s.generate(ChoiceSource::Bytes(ByteChoiceStream::new(vec![0]))).unwrap();
    // Module state persists across cases within one session.
    assert_eq!(a, b"z");
    assert_eq!(b, b"y");
}

#[test]
fn entry_point_rules() {
    let p = parse("def helper():\n    pass\ndef fuzzer_x(r):\n    return ''\ndef gen_y(r):\n    return ''\n").unwrap();
    assert_eq!(entry_point(&p), Some("fuzzer_x"));
    let p = parse("def a():\n    pass\ndef b():\n    return 'b'\n").unwrap();
    assert_eq!(entry_point(&p), Some("b"));
    assert_eq!(entry_point(&parse("x = 1\n").unwrap()), None);
    assert_eq!(run_with("def a():\n    return 'a'\ndef b():\n    return 'b'\n", &[0]).unwrap(), "b");
}

#[test]
fn rng_reads_bytes_with_wraparound() {
    let src = "def gen(rng, out):\n    out.write(str(rng.read_byte()) + ',' + str(rng.read_byte()) + ',' + str(rng.read_byte()))\n";
    assert_eq!(run_with(src, &[7, 9]).unwrap(), "7,9,7");
    let src = "def gen(rng):\n    return str(rng.randint(10, 12)) + rng.choice('abc') + rng.read_chars(2)\n";
    // 5 % 3 = 2 -> 12; 4 % 3 = 1 -> 'b'; 0xc1 & 0x7f = 'A'; 'B'.
    assert_eq!(run_with(src, &[5, 4, 0xc1, 0x42]).unwrap(), "12bAB");
}

#[test]
fn all_zero_bytes_take_first_choices() {
    assert_eq!(run_with(programs::MIXED, &[0]).unwrap(), "((((((((((((((((");
    assert_eq!(run_with(programs::OPEN_ONLY, &[1]).unwrap(), "");
    assert_eq!(run_with(programs::STAR_ONLY, &[0, 1]).unwrap(), "*");
    assert_eq!(run_with(programs::EMPTY, &[0]).unwrap(), "");
    let seed = programs::SEED_TEMPLATE.replace("<FORMAT>", "toy");
    assert_eq!(run_with(&seed, &[0]).unwrap(), "");
    assert_eq!(run_with(&seed, &[2, b'(', b')']).unwrap(), "()");
}

#[test]
fn seeded_source_is_deterministic() {
    let prog = parse(programs::MIXED).unwrap();
    let mut s = Session::new(&prog, &toy_constants(), Limits::default()).unwrap();
    let gen = |s: &mut Session, seed| {
        s.generate(ChoiceSource::Seeded(rand_chacha::ChaCha8Rng::seed_from_u64(seed))).unwrap()
    };
    let a: Vec<_> = (0..20).map(|i| gen(&mut s, i)).collect();
    let b: Vec<_> = (0..20).map(|i| gen(&mut s, i)).collect();
    assert_eq!(a, b);
    assert!(a.iter().any(|x| x.contains(&b')')));
}

#[test]
fn runtime_errors_have_kinds_and_lines() {
    let kind = |src: &str| run_with(src, &[0]).unwrap_err().kind;
    assert_eq!(kind("def gen(r):\n    x = ''\n    x += 1\n    return x\n"), ErrorKind::Type);
    assert_eq!(kind("def gen(r):\n    return y\n"), ErrorKind::Name);
    assert_eq!(kind("def gen(r):\n    return 'a'[3]\n"), ErrorKind::Index);
    assert_eq!(kind("def gen(r):\n    return str(1 // 0)\n"), ErrorKind::ZeroDivision);
    assert_eq!(kind("def gen(r):\n    return r.nope()\n"), ErrorKind::Attribute);
    assert_eq!(kind("def gen(r):\n    return gen(r)\n"), ErrorKind::Recursion);
    assert_eq!(kind("def gen(r):\n    while True:\n        pass\n"), ErrorKind::Timeout);
    assert_eq!(kind("def gen(r):\n    return 'x' * 100000000\n"), ErrorKind::Memory);
    assert_eq!(kind("def gen(r):\n    return 1\n"), ErrorKind::Type);
    assert_eq!(kind("def gen(r):\n    return r.randint(3, 1)\n"), ErrorKind::Value);
    assert_eq!(kind("def gen(r):\nreturn ''\n"), ErrorKind::Syntax);
    assert_eq!(kind("def gen(r):\n    elif x:\n        pass\n"), ErrorKind::Syntax);
    assert_eq!(kind("def gen(r):\n    return 1.5\n"), ErrorKind::Syntax);
    assert_eq!(kind("x = 1\n"), ErrorKind::Name);
    let e = run_with("def gen(r):\n    s = ''\n\n    s += 1\n", &[0]).unwrap_err();
    assert_eq!(e.line, 4);
}

#[test]
fn deadline_stops_long_runs() {
    let prog = parse("def gen(r):\n    while True:\n        pass\n").unwrap();
    let limits = Limits { fuel: u64::MAX, ..Limits::default() };
    let mut s = Session::new(&prog, &BTreeMap::new(), limits).unwrap();
    s.set_deadline(Some(Instant::now() + std::time::Duration::from_millis(50)));
    let e = s.generate(ChoiceSource::Bytes(ByteChoiceStream::new(vec![0]))).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Timeout);
}

#[test]
fn imports_annotations_and_docstrings() {
    let src = r#"import random
from typing import TextIO

def gen_doc(rng: random.Random, output: TextIO) -> None:
    """Writes a greeting."""
    greeting: str = "hi"
    output.write(greeting)
"#;
    assert_eq!(run_with(src, &[0]).unwrap(), "hi");
}

#[test]
fn byte_stream_counts_reads() {
    let mut s = ByteChoiceStream::new(vec![1, 2, 3]);
    let got: Vec<u8> = (0..5).map(|_| s.next_byte()).collect();
    assert_eq!(got, vec![1, 2, 3, 1, 2]);
    assert_eq!(s.consumed(), 5);
}

#[test]
#[should_panic]
fn byte_stream_rejects_empty() {
    ByteChoiceStream::new(Vec::new());
}
