"""Shared fixtures: the manager/employee specification in its three stages"""

import pytest

from core.text_format import parse_query, parse_spec

SCHEMA = "schema { Man/2 Emp/3 }\n"

BASE_MAPPINGS = """
mappings {
  Man(x,z), Emp(y,z,u) -> manages(x,y) ;
  Emp(x,y,z) -> Employee(x) ;
}
"""

MANAGER_MAPPINGS = """
mappings {
  Man(x,z), Emp(y,z,u) -> manages(x,y) ;
  Emp(x,y,z) -> Employee(x) ;
  Man(x,y) -> Manager(x) ;
}
"""

EL_ONTOLOGY = """
ontology el {
  Manager [= Employee ;
  Manager [= exists manages.Secretary ;
}
"""


@pytest.fixture
def base_spec():
    return parse_spec(SCHEMA + BASE_MAPPINGS)


@pytest.fixture
def manager_spec():
    return parse_spec(SCHEMA + MANAGER_MAPPINGS)


@pytest.fixture
def ontology_spec():
    return parse_spec(SCHEMA + MANAGER_MAPPINGS + EL_ONTOLOGY)


@pytest.fixture
def source_query():
    """Parse a source query against the manager/employee schema"""
    def parse(text):
        return parse_query(text, parse_spec(SCHEMA).source_schema)
    return parse


@pytest.fixture
def spec_files(tmp_path):
    """Write the final specification and a few queries to disk for CLI runs"""
    files = {
        'spec': SCHEMA + MANAGER_MAPPINGS + EL_ONTOLOGY,
        'base': SCHEMA + BASE_MAPPINGS,
        'man': "q(x) :- Man(x,y).\n",
        'emp': "q(x) :- Emp(x,y,z).\n",
        'join': "q(x,y) :- Man(x,z), Emp(y,z,u).\n",
        'manages': "q(x,y) :- manages(x,y).\n",
        'employee': "q(x) :- Employee(x).\n",
        'abox': "facts { Manager(a) }\n",
    }
    paths = {}
    for name, text in files.items():
        path = tmp_path / f"{name}.txt"
        path.write_text(text, encoding='utf-8')
        paths[name] = str(path)
    return paths
