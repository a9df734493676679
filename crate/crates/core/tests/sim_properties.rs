//! Firmware-model properties under arbitrary interleavings.

use clockgen::regmap::parse_board_map;
use clockgen::sim::Board;
use clockgen::wire::{encode_command, BridgeCommand};
use clockgen::{BoardConfig, DEFAULT_MAP};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Ingest(usize),
    Step,
}

fn command() -> impl Strategy<Value = BridgeCommand> {
    prop_oneof![
        (any::<u8>(), any::<u8>()).prop_map(|(r, v)| BridgeCommand::write(0x50, r, v)),
        any::<u8>().prop_map(|r| BridgeCommand::read(0x50, r)),
        any::<u8>().prop_map(|r| BridgeCommand::read(0x70, r)),
    ]
}

fn ram_board(latency: u32) -> Board {
    let map = parse_board_map(&format!("{DEFAULT_MAP}\n[device 0x50 ram]\n")).unwrap();
    let mut b = Board::new(&map, BoardConfig { smb_latency_steps: latency, ..BoardConfig::default() }).unwrap();
    b.boot();
    b
}

proptest! {
    #[test]
    fn every_command_dispatched_once_in_order(
        cmds in prop::collection::vec(command(), 1..20),
        ops in prop::collection::vec(prop_oneof![(1usize..8).prop_map(Op::Ingest), Just(Op::Step)], 0..80),
        latency in 1u32..=5,
    ) {
        let mut board = ram_board(latency);
        let stream: Vec<u8> = cmds.iter().flat_map(|c| encode_command(c).unwrap()).collect();
        let mut pos = 0;
        for op in ops {
            match op {
                Op::Ingest(n) => {
                    let end = (pos + n).min(stream.len());
                    board.ingest(&stream[pos..end]);
                    pos = end;
                }
                Op::Step => board.step(),
            }
            let fw = board.firmware();
            prop_assert!(!(fw.flag_read && fw.flag_write));
            prop_assert!(fw.rx_buffered() < 4);
        }
        board.ingest(&stream[pos..]);
        board.run_until_idle();
        let log: Vec<_> = board.dispatch_log().iter().map(|r| r.command).collect();
        prop_assert_eq!(log, cmds.clone());
        prop_assert!(board.dispatch_log().iter().all(|r| r.latency() <= 5));
        let reads = cmds.iter().filter(|c| c.is_read()).count();
        prop_assert_eq!(board.firmware().tx_len(), reads);
    }

    #[test]
    fn write_then_read_echoes(reg in any::<u8>(), value in any::<u8>(), latency in 1u32..=5) {
        let mut board = ram_board(latency);
        board.ingest(&encode_command(&BridgeCommand::write(0x50, reg, value)).unwrap());
        board.ingest(&encode_command(&BridgeCommand::read(0x50, reg)).unwrap());
        board.run_until_idle();
        prop_assert_eq!(board.take_tx(2), vec![value]);
    }
}
