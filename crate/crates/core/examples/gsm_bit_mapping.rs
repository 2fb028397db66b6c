//! Bit-to-codeword mapping of BPSK GSM(4,2).

use pmsim::schemes::{Scheme, SchemeConfig, SchemeKind};

fn main() -> pmsim::Result<()> {
    let scheme = Scheme::build(&SchemeConfig { p: Some(2), ..SchemeConfig::new(SchemeKind::Gsm, 4) })?;
    let act = scheme.activation.as_ref().expect("GSM has an activation table");
    println!("GSM(4,2) BPSK: {} bits per codeword, patterns {:?}", scheme.bits_per_block(), act.one_based());
    println!("bits      codeword (times sqrt 2)");
    for cw in scheme.codebook()? {
        let bits: String = cw.bits.iter().map(|b| char::from(b'0' + b)).collect();
        let col: Vec<String> = (0..4).map(|r| format!("{:+.0}", cw.s[(r, 0)].re * 2f64.sqrt())).collect();
        println!("{} {}  [{}]", &bits[..2], &bits[2..], col.join(", "));
    }
    Ok(())
}
