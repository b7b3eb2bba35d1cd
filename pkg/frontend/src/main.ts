import { GatewayClient } from "./api";
import { Controller } from "./controller";
import { Store } from "./store";
import { ConsoleUI } from "./ui";
import "./style.css";

const defaultBase =
  new URLSearchParams(window.location.search).get("gateway") ??
  "http://127.0.0.1:8025";

const client = new GatewayClient(defaultBase);
const store = new Store();
const controller = new Controller(client, store);

new ConsoleUI(document.getElementById("app")!, store, controller);
