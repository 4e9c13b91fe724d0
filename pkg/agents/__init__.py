from agents.mpc_agent.agent import MPCAgent
from agents.rql_agent.agent import RQLAgent
from utils.config_schema import ExperimentConfig

AGENTS = {MPCAgent.mode: MPCAgent, RQLAgent.mode: RQLAgent}


def make_agent(config: ExperimentConfig):
    """Controller instance for config.controller.mode; instances are single-owner."""
    return AGENTS[config.controller.mode](config)
