use satdtn::fragproto::{decode_frame, encode_frame, FragError, Fragment, FragmentHeader};

const VECTORS: &str = include_str!("fixtures/wire_vectors.txt");

fn fragment(fields: &[&str]) -> Fragment {
    let n = |i: usize| fields[i].parse::<u32>().unwrap();
    let payload = if fields[4] == "-" { vec![] } else { hex::decode(fields[4]).unwrap() };
    Fragment {
        header: FragmentHeader {
            msg_id: n(0) as u16,
            frag_index: n(1) as u8,
            frag_total: n(2) as u8,
            src_node: n(3) as u8,
            payload_len: payload.len() as u8,
        },
        payload,
    }
}

#[test]
fn conformance_vectors() {
    let mut seen = 0;
    for line in VECTORS.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "ok" | "decode" => {
                let f = fragment(&fields[1..6]);
                let wire = hex::decode(fields[6]).unwrap();
                assert_eq!(decode_frame(&wire, 32).unwrap(), f, "{line}");
                if fields[0] == "ok" {
                    assert_eq!(encode_frame(&f, 32).unwrap(), wire, "{line}");
                }
            }
            "err" => {
                let wire = hex::decode(fields[2]).unwrap();
                let err = decode_frame(&wire, 32).unwrap_err();
                let kind = match err {
                    FragError::BadLength { .. } => "BadLength",
                    FragError::BadHeader(_) => "BadHeader",
                    other => panic!("{line}: unexpected {other:?}"),
                };
                assert_eq!(kind, fields[1], "{line}");
            }
            other => panic!("unknown vector kind {other}"),
        }
        seen += 1;
    }
    assert_eq!(seen, 11);
}

#[test]
fn oversized_payload_is_not_encoded() {
    let mut f = fragment(&["1", "0", "1", "7", "-"]);
    f.payload = vec![0; 27];
    f.header.payload_len = 27;
    assert!(matches!(encode_frame(&f, 32), Err(FragError::PayloadOverflow { len: 27, cap: 26 })));
}
