import logging

from src.run_guards import LabValidator, RunLogger


def test_decimal_strings():
    assert LabValidator.validate_decimal_string('0.125')
    assert LabValidator.validate_decimal_string('-3e-4')
    assert LabValidator.validate_decimal_string('1/3')
    assert LabValidator.validate_decimal_string(2)
    assert not LabValidator.validate_decimal_string('1/0')
    assert not LabValidator.validate_decimal_string(0.5)
    assert not LabValidator.validate_decimal_string(True)
    assert not LabValidator.validate_decimal_string('abc')


def test_precision_bounds():
    assert LabValidator.validate_precision(80)[0]
    assert LabValidator.validate_precision('120')[0]
    assert not LabValidator.validate_precision(29)[0]
    assert not LabValidator.validate_precision(5000)[0]
    assert not LabValidator.validate_precision('muitos')[0]


def test_order_bounds():
    assert LabValidator.validate_order(8)[0]
    assert not LabValidator.validate_order(0)[0]
    assert not LabValidator.validate_order(17)[0]


def test_parse_range():
    assert LabValidator.parse_range('4:16') == (True, range(4, 17))
    assert LabValidator.parse_range(' 3 : 3 ') == (True, range(3, 4))
    assert LabValidator.parse_range(range(1, 4)) == (True, range(1, 4))
    assert not LabValidator.parse_range('0:3')[0]
    assert not LabValidator.parse_range('7:2')[0]
    assert not LabValidator.parse_range('4-16')[0]


def test_sanitize_int():
    assert LabValidator.sanitize_int(' 12 ') == 12
    assert LabValidator.sanitize_int(None) is None
    assert LabValidator.sanitize_int(False) is None


def test_log_event_entry(caplog):
    with caplog.at_level(logging.INFO, logger='billiards_lab'):
        entry = RunLogger.log_event('orbit_solved', {'n': 4}, run_id=7)
    assert entry['event_type'] == 'orbit_solved'
    assert entry['run_id'] == 7
    assert 'LAB_EVENT' in caplog.text and '"orbit_solved"' in caplog.text


def test_debug_events_are_filtered(caplog):
    with caplog.at_level(logging.INFO, logger='billiards_lab'):
        RunLogger.log_event('newton_step', {'residual': '1e-30'}, level=logging.DEBUG)
    assert 'newton_step' not in caplog.text
