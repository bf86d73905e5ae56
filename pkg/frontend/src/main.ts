/** Entry point: connect to the kernel's web-socket gateway and mount the
 * workbench. The gateway host and user come from the query string, e.g.
 * `?ws=127.0.0.1:7421&user=alice`.
 */

import { Connection } from "./connection";
import { App } from "./ui/app";

const params = new URLSearchParams(location.search);
const gateway = params.get("ws") ?? `${location.hostname || "127.0.0.1"}:7421`;
const user = params.get("user") ?? "workbench";

const sock = new WebSocket(`ws://${gateway}`);
const conn = new Connection(sock);
new App(document.getElementById("app")!, conn);
void conn.login(user);
