"""
Plain-text `key = value` configuration files.

A section header is optional; keys are case-insensitive and dashes are read as
underscores, so `patch-size = 5` and `patch_size = 5` are equivalent.
"""

import configparser
import os

TRUE_WORDS = ("1", "true", "yes", "on")
FALSE_WORDS = ("0", "false", "no", "off")


def normalize_key(key):
    return key.strip().lower().replace("-", "_")


def parse_bool(value):
    if isinstance(value, bool):
        return value
    word = str(value).strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise ValueError("not a boolean value: %r" % value)


def read_key_values(path, section):
    """ Read every key of a configuration file.

    :param path: file path
    :param section: section name assumed when the file has no header
    :return dict of normalized key -> raw string value, all sections merged
    """
    path = os.fspath(path)
    with open(path) as f:
        text = f.read()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        try:
            parser.read_string(text, source=path)
        except configparser.MissingSectionHeaderError:
            parser = configparser.ConfigParser(interpolation=None)
            parser.read_string("[%s]\n%s" % (section, text), source=path)
    except configparser.Error as e:
        raise ValueError("malformed configuration file %s: %s" % (path, e))
    items = {}
    for name in parser.sections():
        for key, value in parser.items(name):
            items[normalize_key(key)] = value.strip()
    return items


def write_key_values(path, items, section):
    with open(path, "w") as f:
        f.write("[%s]\n" % section)
        for key, value in items.items():
            f.write("%s = %s\n" % (key, value))
